import numpy as np
import pytest

from bridgematch.bridge import BridgeSpec
from bridgematch.core import draw_normals, root_stream, split_stream
from bridgematch.couplings import PairedBatch
from bridgematch.metrics import endpoint_mse
from bridgematch.nets import mlp_init
from bridgematch.sampling import SamplerConfig, sample_endpoints
from bridgematch.training import (
    ModelConfig, TrainConfig, TrainingAborted, init_model, make_training_batch, make_training_example, train,
)

from oracles import sign_flip_bayes_mse

SMALL = ModelConfig(hidden=[64, 64], activation="silu", time_features=4)


def deterministic(g):
    def draw(n, stream):
        x0 = draw_normals(stream, (n, 1))
        return PairedBatch(x0, g(x0))
    return draw


identity = deterministic(lambda x: x.copy())
sign_flip = deterministic(lambda x: -x)


def regression_mse(model, cfg, draw, seed, n=20_000):
    s = root_stream(seed)
    batch = draw(n, split_stream(s, 0))
    x_t, cond, t, target = make_training_batch(cfg, batch, split_stream(s, 1))
    pred = model.predict_batch(x_t, cond, t)
    return float(np.mean(np.sum((pred - target) ** 2, axis=1)))


def generated_mse(model, cfg, draw, seed, n=5000):
    s = root_stream(seed)
    starts = draw(n, split_stream(s, 0))
    gen = sample_endpoints(model, BridgeSpec(cfg.sigma, 1), SamplerConfig(100), starts.x0s, split_stream(s, 1))
    return endpoint_mse(gen.x1s, starts.x1s)


def test_example_alpha_zero_at_time_zero():
    cfg = TrainConfig(cond_alpha=0.0, sigma=1.0)
    x0, x1 = np.array([0.3, -1.2]), np.array([2.0, 2.0])
    x_t, cond, t, target = make_training_example(cfg, x0, x1, root_stream(0), t=0.0)
    np.testing.assert_array_equal(x_t, x0)
    np.testing.assert_array_equal(cond, x0)
    np.testing.assert_array_equal(target, x1)


def test_example_alpha_one_has_no_conditioning():
    cfg = TrainConfig(cond_alpha=1.0)
    for seed in range(20):
        _, cond, t, _ = make_training_example(cfg, [0.0], [1.0], root_stream(seed))
        assert cond is None and 0.0 <= t <= 1.0


def test_example_interior_alpha_covariance():
    cfg = TrainConfig(cond_alpha=0.5, sigma=1.0)
    n = 100_000
    z = PairedBatch(np.zeros((n, 1)), np.zeros((n, 1)))
    x_t, cond, _, _ = make_training_batch(cfg, z, root_stream(4), t=0.8)
    prod = cond[:, 0] * x_t[:, 0]  # both means are exactly zero
    expected = 0.4 * (1 - 0.8)
    assert abs(prod.mean() - expected) < 4 * prod.std() / np.sqrt(n)


def test_single_example_matches_batch_law():
    cfg = TrainConfig(cond_alpha=0.5, sigma=1.0)
    x_t, cond, t, target = make_training_example(cfg, [1.0], [2.0], root_stream(0))
    assert x_t.shape == cond.shape == target.shape == (1,)


def test_zero_steps_returns_initial_model():
    cfg = TrainConfig(cond_alpha=0.0, steps=0)
    s = root_stream(3)
    model = init_model(1, cfg, SMALL, split_stream(s, 0))
    out = train(identity, cfg, s, model=model)
    for a, b in zip(model.params(), out.params()):
        np.testing.assert_array_equal(a, b)


def test_training_is_deterministic():
    cfg = TrainConfig(cond_alpha=0.5, steps=20, batch_size=16)
    a = train(sign_flip, cfg, root_stream(1), arch=SMALL)
    b = train(sign_flip, cfg, root_stream(1), arch=SMALL)
    for x, y in zip(a.params(), b.params()):
        np.testing.assert_array_equal(x, y)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_loss_aborts():
    bad = deterministic(lambda x: np.full_like(x, np.inf))
    with pytest.raises(TrainingAborted) as err:
        train(bad, TrainConfig(cond_alpha=1.0, steps=3, batch_size=4), root_stream(0), arch=SMALL)
    assert err.value.step == 0 and err.value.seed_path[-1] == 0


def test_cond_mode_mismatch_rejected():
    model = mlp_init([7, 8, 1], "silu", "initial_point", 2, root_stream(0))
    with pytest.raises(ValueError):
        train(identity, TrainConfig(cond_alpha=1.0, steps=1), root_stream(0), model=model)


def test_config_validation():
    for bad in ({"cond_alpha": 1.5}, {"steps": -1}, {"batch_size": 0}, {"sigma": 0.0},
                {"lambda_weighting": "snr"}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


@pytest.mark.slow
def test_identity_coupling_recovered_with_augmentation():
    cfg = TrainConfig(cond_alpha=0.0, steps=5000, batch_size=256)
    log = []
    model = train(identity, cfg, root_stream(0), arch=SMALL, loss_log=log)
    assert regression_mse(model, cfg, identity, 99) < 1e-2
    losses = np.array([v for _, v in log])
    k = len(losses) // 10
    assert np.median(losses[-k:]) < np.median(losses[:k])


def test_sign_flip_bayes_bound_value():
    # E[X1 | X_t] regression error for plain bridge matching on X1 = -X0, sigma = 1
    assert sign_flip_bayes_mse(1.0) == pytest.approx(0.4727997174, abs=1e-9)


@pytest.mark.slow
def test_sign_flip_needs_augmentation():
    aug_cfg = TrainConfig(cond_alpha=0.0, steps=5000, batch_size=256)
    plain_cfg = TrainConfig(cond_alpha=1.0, steps=5000, batch_size=256)
    aug = train(sign_flip, aug_cfg, root_stream(0), arch=SMALL)
    plain = train(sign_flip, plain_cfg, root_stream(0), arch=SMALL)

    assert generated_mse(aug, aug_cfg, sign_flip, 7) < 1e-2
    assert generated_mse(plain, plain_cfg, sign_flip, 7) > 0.5
    # a plain model can never beat the Bayes regression error
    assert regression_mse(plain, plain_cfg, sign_flip, 8) > sign_flip_bayes_mse(1.0) - 0.02


@pytest.mark.slow
def test_conditioning_monotone_on_sign_flip():
    medians = []
    for alpha in (1.0, 0.5, 0.0):
        cfg = TrainConfig(cond_alpha=alpha, steps=3000, batch_size=256)
        vals = [generated_mse(train(sign_flip, cfg, root_stream(seed), arch=SMALL), cfg, sign_flip, 50 + seed)
                for seed in range(3)]
        medians.append(np.median(vals))
    assert medians[0] >= medians[1] >= medians[2]


@pytest.mark.slow
def test_deterministic_coupling_reaches_noise_floor():
    # floor: the optimisation error on the trivially learnable identity map
    cfg = TrainConfig(cond_alpha=0.0, steps=5000, batch_size=256)
    floor = regression_mse(train(identity, cfg, root_stream(2), arch=SMALL), cfg, identity, 3)
    trained = regression_mse(train(sign_flip, cfg, root_stream(2), arch=SMALL), cfg, sign_flip, 3)
    assert trained < 10 * max(floor, 1e-6)
