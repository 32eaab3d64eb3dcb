import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgematch.core import draw_normals, draw_uniform, root_stream, split_stream
from bridgematch.couplings import CROSS_PAIRING, CROSS_SOURCE_CENTERS, CROSS_TARGET_CENTERS, PairedBatch
from bridgematch.metrics import (
    CouplingReport, coupling_report, empirical_cov, endpoint_mse, energy_distance, pairing_accuracy,
)

N = 100_000


def on_centers(partner):
    comp = np.array([0, 1, 0, 1, 1])
    return PairedBatch(CROSS_SOURCE_CENTERS[comp], CROSS_TARGET_CENTERS[np.asarray(partner)[comp]])


def test_pairing_accuracy_exact_and_anti():
    assert pairing_accuracy(on_centers(CROSS_PAIRING), CROSS_SOURCE_CENTERS, CROSS_TARGET_CENTERS, CROSS_PAIRING) == 1.0
    anti = tuple(1 - i for i in CROSS_PAIRING)
    assert pairing_accuracy(on_centers(anti), CROSS_SOURCE_CENTERS, CROSS_TARGET_CENTERS, CROSS_PAIRING) == 0.0


def test_pairing_accuracy_random_assignment():
    n = 10_000
    s = root_stream(1)
    src = (draw_uniform(split_stream(s, 0), n) < 0.5).astype(int)
    tgt = (draw_uniform(split_stream(s, 1), n) < 0.5).astype(int)
    batch = PairedBatch(CROSS_SOURCE_CENTERS[src], CROSS_TARGET_CENTERS[tgt])
    acc = pairing_accuracy(batch, CROSS_SOURCE_CENTERS, CROSS_TARGET_CENTERS, CROSS_PAIRING)
    assert 0.48 <= acc <= 0.52


def test_pairing_accuracy_errors():
    with pytest.raises(ValueError):
        pairing_accuracy(PairedBatch.empty(2), CROSS_SOURCE_CENTERS, CROSS_TARGET_CENTERS, CROSS_PAIRING)
    with pytest.raises(ValueError):
        pairing_accuracy(on_centers(CROSS_PAIRING), CROSS_SOURCE_CENTERS, CROSS_TARGET_CENTERS, (0, 0))


@settings(max_examples=25, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.integers(0, 1000))
def test_pairing_accuracy_translation_invariant(dx, dy, seed):
    s = root_stream(seed)
    batch = PairedBatch(CROSS_SOURCE_CENTERS[[0, 1, 1, 0]] + draw_normals(split_stream(s, 0), (4, 2)),
                        CROSS_TARGET_CENTERS[[1, 0, 1, 1]] + draw_normals(split_stream(s, 1), (4, 2)))
    shift = np.array([dx, dy])
    moved = PairedBatch(batch.x0s + shift, batch.x1s + shift)
    a = pairing_accuracy(batch, CROSS_SOURCE_CENTERS, CROSS_TARGET_CENTERS, CROSS_PAIRING)
    b = pairing_accuracy(moved, CROSS_SOURCE_CENTERS + shift, CROSS_TARGET_CENTERS + shift, CROSS_PAIRING)
    assert a == b


def test_energy_distance_examples():
    x = draw_normals(root_stream(0), (500, 2))
    perm = np.random.default_rng(0).permutation(500)
    assert abs(energy_distance(x, x[perm])) < 1e-12
    assert energy_distance([0.0], [3.5]) == 7.0


def test_energy_distance_null():
    s = root_stream(3)
    a = draw_normals(split_stream(s, 0), 10_000)
    b = draw_normals(split_stream(s, 1), 10_000)
    assert energy_distance(a, b) < 0.01


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 10_000))
def test_energy_distance_exactly_symmetric(n, m, seed):
    s = root_stream(seed)
    a = draw_normals(split_stream(s, 0), (n, 2))
    b = draw_normals(split_stream(s, 1), (m, 2))
    assert energy_distance(a, b) == energy_distance(b, a)
    assert energy_distance(a, b) >= -1e-12


def test_energy_distance_increases_with_shift():
    medians = []
    for mu in (0.0, 1.0, 2.0):
        vals = []
        for seed in range(5):
            s = root_stream(seed)
            vals.append(energy_distance(draw_normals(split_stream(s, 0), 500),
                                        mu + draw_normals(split_stream(s, 1), 500)))
        medians.append(np.median(vals))
    assert medians[0] < medians[1] < medians[2]


def test_energy_distance_dim_mismatch():
    with pytest.raises(ValueError):
        energy_distance(np.zeros((3, 2)), np.zeros((3, 1)))


def test_empirical_cov_identity_and_independent():
    z = draw_normals(root_stream(5), (N, 1))
    cov = empirical_cov(PairedBatch(z, z))[0, 0]
    assert abs(cov - 1.0) < 4 * np.sqrt(2.0 / N)
    w = draw_normals(root_stream(6), (N, 1))
    assert abs(empirical_cov(PairedBatch(z, w))[0, 0]) < 4 / np.sqrt(N)


def test_empirical_cov_constant_batch_is_zero():
    batch = PairedBatch(np.full((10, 2), 3.0), np.full((10, 2), -1.0))
    assert np.all(empirical_cov(batch) == 0.0)


def test_endpoint_mse_examples():
    x = draw_normals(root_stream(7), (100, 3))
    assert endpoint_mse(x, x) == 0.0
    assert endpoint_mse(x + 0.5, x) == pytest.approx(3 * 0.25)
    perm = np.random.default_rng(1).permutation(100)
    assert endpoint_mse(x[perm], x) > endpoint_mse(x, x)
    with pytest.raises(ValueError):
        endpoint_mse(x[:5], x)


def test_report_text_block():
    batch = on_centers(CROSS_PAIRING)
    report = coupling_report(batch, batch.x1s, CROSS_SOURCE_CENTERS, CROSS_TARGET_CENTERS, CROSS_PAIRING,
                             reference_x1s=batch.x1s)
    text = report.as_text()
    assert "pairing_accuracy=1.0" in text
    assert "endpoint_mse=0.0" in text
    assert isinstance(report, CouplingReport) and report.energy_distance_marginal >= 0
