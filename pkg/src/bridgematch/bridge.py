"""Brownian-bridge interpolation, conditional scores and drifts.

The reference process is ``sigma * B_t``.  Every function here accepts either a
single state of shape ``(d,)`` or a batch of shape ``(n, d)``; times may be a
scalar or one value per batch row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bridgematch.core import RngStream, draw_normals


@dataclass(frozen=True)
class BridgeSpec:
    """Brownian reference with diffusion scale ``sigma`` on R^dim.

    ``sigma = 0`` is admitted only so the samplers can run their deterministic
    limit; the scores and the training loop reject it.
    """

    sigma: float
    dim: int

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")


def _as_time(t, x: np.ndarray) -> np.ndarray | float:
    t_arr = np.asarray(t, dtype=np.float64)
    if t_arr.ndim == 0:
        return float(t_arr)
    if x.ndim == 1:
        raise ValueError("per-row times need batched states")
    return t_arr.reshape(-1, 1)


def _check_pair(spec: BridgeSpec, x0: np.ndarray, x1: np.ndarray):
    if x0.shape != x1.shape:
        raise ValueError(f"endpoint shapes differ: {x0.shape} vs {x1.shape}")
    if x0.shape[-1] != spec.dim:
        raise ValueError(f"endpoints have dim {x0.shape[-1]}, bridge has dim {spec.dim}")


def _check_unit_interval(t, name="t"):
    t_arr = np.asarray(t)
    if np.any(t_arr < 0) or np.any(t_arr > 1):
        raise ValueError(f"{name} must lie in [0, 1]")


def bridge_mean_std(spec: BridgeSpec, x0, x1, t):
    """Mean and per-coordinate standard deviation of the bridge at time ``t``."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    tt = _as_time(t, x0)
    mean = (1.0 - tt) * x0 + tt * x1
    std = spec.sigma * np.sqrt(tt * (1.0 - tt))
    return mean, std


def sample_bridge_point(spec: BridgeSpec, x0, x1, t, stream: RngStream, noise=None) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    _check_pair(spec, x0, x1)
    _check_unit_interval(t)
    mean, std = bridge_mean_std(spec, x0, x1, t)
    if noise is None:
        noise = draw_normals(stream, x0.shape)
    # Exact pinning: the noise coefficient vanishes at both ends.
    return mean + std * noise


def sample_bridge_pair(spec: BridgeSpec, x0, x1, s, t, stream: RngStream):
    """Joint draw of ``(X_s, X_t)`` along one bridge, ``s <= t``.

    ``X_s`` is drawn from the bridge marginal, then ``X_t`` from the sub-bridge
    pinned at ``(s, X_s)`` and ``(1, x1)``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    _check_pair(spec, x0, x1)
    s_arr = np.asarray(s, dtype=np.float64)
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(s_arr > t_arr):
        raise ValueError("sample_bridge_pair needs s <= t")
    _check_unit_interval(s, "s")
    _check_unit_interval(t, "t")

    z = draw_normals(stream, (2,) + x0.shape)
    x_s = sample_bridge_point(spec, x0, x1, s, stream, noise=z[0])
    ss = _as_time(s, x0)
    tt = _as_time(t, x0)
    remaining = 1.0 - ss
    safe = np.where(remaining > 0, remaining, 1.0)
    frac = np.where(remaining > 0, (tt - ss) / safe, 1.0)
    var = np.where(remaining > 0, spec.sigma**2 * (tt - ss) * (1.0 - tt) / safe, 0.0)
    x_t = x_s + frac * (x1 - x_s) + np.sqrt(np.maximum(var, 0.0)) * z[1]
    # s == t must give identical outputs bit for bit.
    x_t = np.where(np.broadcast_to(tt == ss, x_t.shape), x_s, x_t)
    return x_s, x_t


def _check_before_one(t):
    if np.any(np.asarray(t) >= 1):
        raise ValueError("t must be < 1 (the bridge drift is singular at t = 1)")


def bridge_drift(x1_hat, x_t, t) -> np.ndarray:
    """Drift ``(x1_hat - x_t) / (1 - t)`` steering toward a predicted endpoint."""
    _check_before_one(t)
    x1_hat = np.asarray(x1_hat, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    if x1_hat.shape != x_t.shape:
        raise ValueError(f"shape mismatch: {x1_hat.shape} vs {x_t.shape}")
    return (x1_hat - x_t) / (1.0 - _as_time(t, x_t))


def bridge_score(x1, x_t, t, spec: BridgeSpec) -> np.ndarray:
    """Gradient w.r.t. ``x_t`` of the reference log-transition ``log Q(x1 | x_t)``.

    ``Q(x1 | x_t) = N(x_t, sigma^2 (1 - t) I)``, so the score is
    ``(x1 - x_t) / (sigma^2 (1 - t))``.
    """
    _check_before_one(t)
    if spec.sigma <= 0:
        raise ValueError("bridge_score needs sigma > 0")
    x1 = np.asarray(x1, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    if x1.shape != x_t.shape:
        raise ValueError(f"shape mismatch: {x1.shape} vs {x_t.shape}")
    return (x1 - x_t) / (spec.sigma**2 * (1.0 - _as_time(t, x_t)))
