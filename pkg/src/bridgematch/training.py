"""Bridge-matching training loops.

One loop covers both algorithms through the conditioning level ``cond_alpha``:
1 regresses the endpoint from ``(x_t, t)`` alone (plain bridge matching), 0
also feeds the initial point (augmented), and values in between feed the
bridge state at time ``cond_alpha * t``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from bridgematch.bridge import BridgeSpec, sample_bridge_pair, sample_bridge_point
from bridgematch.core import RngStream, as_vec, draw_uniform, split_path, split_stream
from bridgematch.couplings import PairedBatch
from bridgematch.nets import (
    MlpModel, adam_init, adam_step, cond_mode_for, input_dim, mlp_init, mlp_loss_grad,
)

log = logging.getLogger(__name__)

LAMBDA_SCHEMES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "uniform": lambda t: np.ones_like(t),
}


class TrainingAborted(RuntimeError):
    def __init__(self, step: int, seed_path: tuple[int, ...], loss: float):
        super().__init__(f"non-finite loss {loss} at step {step} (batch stream {list(seed_path)})")
        self.step = step
        self.seed_path = seed_path


@dataclass
class TrainConfig:
    cond_alpha: float = 1.0
    steps: int = 1000
    batch_size: int = 256
    sigma: float = 1.0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lambda_weighting: str = "uniform"
    t_sampling: str = "uniform"

    def __post_init__(self):
        if not 0.0 <= self.cond_alpha <= 1.0:
            raise ValueError(f"cond_alpha must lie in [0, 1], got {self.cond_alpha}")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.lambda_weighting not in LAMBDA_SCHEMES:
            raise ValueError(f"unknown lambda_weighting {self.lambda_weighting!r}")
        if self.t_sampling != "uniform":
            raise ValueError(f"unknown t_sampling {self.t_sampling!r}")

    @property
    def cond_mode(self) -> str:
        return cond_mode_for(self.cond_alpha)


@dataclass
class ModelConfig:
    hidden: list[int] = field(default_factory=lambda: [128, 128, 128])
    activation: str = "silu"
    time_features: int = 4

    def layer_dims(self, dim: int, cond_mode: str) -> list[int]:
        return [input_dim(dim, cond_mode, self.time_features), *self.hidden, dim]


def make_training_example(cfg: TrainConfig, x0, x1, stream: RngStream, t: float | None = None):
    """One regression example ``(x_t, cond, t, target)`` for a pair ``(x0, x1)``."""
    x0 = as_vec(x0, name="x0")
    x1 = as_vec(x1, x0.size, name="x1")
    spec = BridgeSpec(cfg.sigma, x0.size)
    if t is None:
        t = float(draw_uniform(stream))
    if cfg.cond_alpha == 1.0:
        return sample_bridge_point(spec, x0, x1, t, stream), None, t, x1
    if cfg.cond_alpha == 0.0:
        return sample_bridge_point(spec, x0, x1, t, stream), x0, t, x1
    x_s, x_t = sample_bridge_pair(spec, x0, x1, cfg.cond_alpha * t, t, stream)
    return x_t, x_s, t, x1


def make_training_batch(cfg: TrainConfig, batch: PairedBatch, stream: RngStream, t=None):
    """Vectorised ``make_training_example`` with one fresh time per row."""
    n = len(batch)
    spec = BridgeSpec(cfg.sigma, batch.dim)
    if t is None:
        t = draw_uniform(stream, n)
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,)).copy()
    if cfg.cond_alpha == 1.0:
        return sample_bridge_point(spec, batch.x0s, batch.x1s, t, stream), None, t, batch.x1s
    if cfg.cond_alpha == 0.0:
        return sample_bridge_point(spec, batch.x0s, batch.x1s, t, stream), batch.x0s, t, batch.x1s
    x_s, x_t = sample_bridge_pair(spec, batch.x0s, batch.x1s, cfg.cond_alpha * t, t, stream)
    return x_t, x_s, t, batch.x1s


def init_model(dim: int, cfg: TrainConfig, arch: ModelConfig, stream: RngStream) -> MlpModel:
    mode = cfg.cond_mode
    return mlp_init(arch.layer_dims(dim, mode), arch.activation, mode, arch.time_features,
                    stream, cond_alpha=cfg.cond_alpha)


def train(dataset, cfg: TrainConfig, stream: RngStream, model: MlpModel | None = None,
          arch: ModelConfig | None = None, loss_log: list | None = None) -> MlpModel:
    """Run ``cfg.steps`` Adam steps on the endpoint regression loss.

    ``dataset`` is anything with ``sample(n, stream) -> PairedBatch`` (or a bare
    callable with that signature).  If ``model`` is omitted one is initialised
    from ``arch`` on the stream labelled 0.  ``(step, loss)`` pairs are appended
    to ``loss_log`` when given.
    """
    draw = dataset.sample if hasattr(dataset, "sample") else dataset
    if model is None:
        dim = dataset.dim if hasattr(dataset, "dim") else len(draw(1, split_stream(stream, 2)).x0s[0])
        model = init_model(dim, cfg, arch or ModelConfig(), split_stream(stream, 0))
    if model.cond_mode != cfg.cond_mode:
        raise ValueError(f"model cond_mode {model.cond_mode!r} does not match cond_alpha={cfg.cond_alpha}")
    weighting = LAMBDA_SCHEMES[cfg.lambda_weighting]
    state = adam_init(model, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)

    for step in range(cfg.steps):
        step_stream = split_path(stream, 1, step)
        batch = draw(cfg.batch_size, split_stream(step_stream, 0))
        if batch.dim != model.dim:
            raise ValueError(f"dataset dim {batch.dim} does not match model dim {model.dim}")
        x_t, cond, t, target = make_training_batch(cfg, batch, split_stream(step_stream, 1))
        loss, grads = mlp_loss_grad(model, x_t, cond, t, target, weighting(t))
        if not math.isfinite(loss):
            raise TrainingAborted(step, step_stream.seed_path, loss)
        model, state = adam_step(model, state, grads)
        if loss_log is not None:
            loss_log.append((step, loss))
        if step % 1000 == 0:
            log.debug("step %d loss %.6f", step, loss)
    return model
