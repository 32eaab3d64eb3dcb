"""SDE inference from a learned endpoint predictor.

Two integrators on the uniform grid ``t_i = i / N``:

``bridge_posterior``
    Draw ``X_{t+h}`` from the Brownian bridge running from ``(t, X_t)`` to the
    current prediction at time 1.  The last step has zero variance and lands on
    the prediction, so no clamp is needed.
``euler_maruyama``
    Plain Euler-Maruyama on ``dX = (x1_hat - X) / (1 - t) dt + sigma dB`` up to
    ``1 - t_clamp``, then a deterministic jump onto the prediction.

Paths draw their noise from per-path streams (labelled by path index), so a
path's result does not depend on which batch it was computed in.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from bridgematch.bridge import BridgeSpec, bridge_drift
from bridgematch.core import RngStream, as_vec, draw_normals, split_stream
from bridgematch.couplings import PairedBatch

INTEGRATORS = ("euler_maruyama", "bridge_posterior")
CHUNK = 2048


class Predictor(Protocol):
    dim: int
    cond_mode: str
    cond_alpha: float

    def predict_batch(self, x_t: np.ndarray, cond: np.ndarray | None, t) -> np.ndarray: ...


class SamplingAborted(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


@dataclass
class OraclePredictor:
    """Wraps a closed-form ``fn(x_t, cond, t) -> x1_hat`` as a predictor."""

    fn: Callable
    dim: int
    cond_mode: str = "none"
    cond_alpha: float = 1.0

    def predict_batch(self, x_t, cond, t):
        return np.asarray(self.fn(x_t, cond, t), dtype=np.float64).reshape(np.shape(x_t))


@dataclass
class SamplerConfig:
    num_steps: int = 200
    integrator: str = "bridge_posterior"
    t_clamp: float | None = None

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if self.t_clamp is None:
            self.t_clamp = 1.0 / self.num_steps
        if not 0.0 < self.t_clamp <= 1.0 / self.num_steps:
            raise ValueError(f"t_clamp must lie in (0, 1/num_steps], got {self.t_clamp}")

    def grid(self) -> np.ndarray:
        n = self.num_steps
        return np.array([i / n for i in range(n + 1)])


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    endpoint_preds: np.ndarray


class _History:
    """Realised states so far, for looking up ``X_{alpha t}`` by interpolation."""

    def __init__(self, t0: float, x0: np.ndarray):
        self.times = [t0]
        self.states = [x0]

    def push(self, t: float, x: np.ndarray):
        self.times.append(t)
        self.states.append(x)

    def at(self, tau: float) -> np.ndarray:
        j = bisect.bisect_right(self.times, tau) - 1
        if self.times[j] == tau or j == len(self.times) - 1:
            return self.states[j]
        t_lo, t_hi = self.times[j], self.times[j + 1]
        w = (tau - t_lo) / (t_hi - t_lo)
        return (1.0 - w) * self.states[j] + w * self.states[j + 1]


def _predict(model: Predictor, history: _History, x: np.ndarray, t: float, x0: np.ndarray):
    mode = model.cond_mode
    if mode == "none":
        cond = None
    elif mode == "initial_point":
        cond = x0
    elif mode == "alpha_point":
        cond = history.at(model.cond_alpha * t)
    else:
        raise ValueError(f"unknown cond_mode {mode!r}")
    return model.predict_batch(x, cond, np.full(x.shape[0], t))


def integrate_batch(model: Predictor, spec: BridgeSpec, cfg: SamplerConfig,
                    x0s: np.ndarray, noise: np.ndarray):
    """Integrate ``n`` paths with pre-drawn noise of shape ``(n, N, d)``.

    Returns ``(times, states, preds)`` with states and preds of shape
    ``(n, N + 1, d)``.  ``preds[:, N]`` is the landing point itself.
    """
    x0s = np.atleast_2d(np.asarray(x0s, dtype=np.float64))
    n, d = x0s.shape
    if d != model.dim or d != spec.dim:
        raise ValueError(f"initial points have dim {d}; model {model.dim}, bridge {spec.dim}")
    big_n = cfg.num_steps
    if noise.shape != (n, big_n, d):
        raise ValueError(f"noise shape {noise.shape}, expected {(n, big_n, d)}")
    times = cfg.grid()
    sigma = spec.sigma
    states = np.empty((n, big_n + 1, d))
    preds = np.empty((n, big_n + 1, d))
    x = x0s.copy()
    states[:, 0] = x
    history = _History(0.0, x)

    for i in range(big_n):
        t, t_next = times[i], times[i + 1]
        pred = _predict(model, history, x, t, x0s)
        preds[:, i] = pred
        if cfg.integrator == "bridge_posterior":
            rem = 1.0 - t
            h = t_next - t
            if i == big_n - 1 or rem - h <= 0.0:
                x = pred.copy()
            else:
                x = x + (h / rem) * (pred - x) + sigma * np.sqrt(h * (rem - h) / rem) * noise[:, i]
        elif i < big_n - 1:
            h = t_next - t
            x = x + h * bridge_drift(pred, x, t) + sigma * np.sqrt(h) * noise[:, i]
        else:
            h = (1.0 - cfg.t_clamp) - t
            if h > 0.0:
                x = x + h * bridge_drift(pred, x, t) + sigma * np.sqrt(h) * noise[:, i]
                history.push(1.0 - cfg.t_clamp, x)
                pred = _predict(model, history, x, 1.0 - cfg.t_clamp, x0s)
            x = pred.copy()
        if not np.all(np.isfinite(x)):
            raise SamplingAborted(i + 1)
        states[:, i + 1] = x
        if i + 1 < big_n:
            history.push(t_next, x)
    preds[:, big_n] = x
    return times, states, preds


def _path_noise(stream: RngStream, start: int, count: int, cfg: SamplerConfig, d: int) -> np.ndarray:
    return np.stack([
        draw_normals(split_stream(stream, start + k), (cfg.num_steps, d)) for k in range(count)
    ]) if count else np.zeros((0, cfg.num_steps, d))


def integrate_path(model: Predictor, spec: BridgeSpec, cfg: SamplerConfig, x0, stream: RngStream) -> Trajectory:
    x0 = as_vec(x0, model.dim, name="x0")
    noise = draw_normals(stream, (1, cfg.num_steps, x0.size))
    times, states, preds = integrate_batch(model, spec, cfg, x0[None, :], noise)
    return Trajectory(times, states[0], preds[0])


def sample_trajectories(model: Predictor, spec: BridgeSpec, cfg: SamplerConfig, x0s,
                        stream: RngStream, chunk: int = CHUNK):
    """All trajectories for a batch of starts; path ``i`` uses stream label ``i``."""
    x0s = np.asarray(x0s, dtype=np.float64).reshape(-1, model.dim)
    n, d = x0s.shape
    states = np.empty((n, cfg.num_steps + 1, d))
    preds = np.empty_like(states)
    times = cfg.grid()
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        noise = _path_noise(stream, start, stop - start, cfg, d)
        times, states[start:stop], preds[start:stop] = integrate_batch(model, spec, cfg, x0s[start:stop], noise)
    return times, states, preds


def sample_endpoints(model: Predictor, spec: BridgeSpec, cfg: SamplerConfig, x0s,
                     stream: RngStream, chunk: int = CHUNK) -> PairedBatch:
    x0s = np.asarray(x0s, dtype=np.float64).reshape(-1, model.dim)
    if len(x0s) == 0:
        return PairedBatch.empty(model.dim)
    x1s = np.empty_like(x0s)
    for start in range(0, len(x0s), chunk):
        stop = min(start + chunk, len(x0s))
        noise = _path_noise(stream, start, stop - start, cfg, model.dim)
        _, states, _ = integrate_batch(model, spec, cfg, x0s[start:stop], noise)
        x1s[start:stop] = states[:, -1]
    return PairedBatch(x0s, x1s)
