"""Closed-form analysis of the scalar Gaussian coupling ``N(0, [[1, a], [a, 1]])``.

With a Brownian reference of scale ``sigma``, the Markovian projection of the
bridge mixture is the linear SDE ``dX = kappa(t) X dt + sigma dB``.  Since the
projection keeps the unit marginals, the covariance it produces between the
endpoints is ``exp(K(1))`` with ``K(t) = int_0^t kappa``.  ``f_alpha`` returns
that value; it equals ``a`` only at the Schroedinger-bridge correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bridgematch.bridge import BridgeSpec, bridge_score


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class GaussianCouplingSpec:
    corr_alpha: float
    sigma: float

    def __post_init__(self):
        if not 0.0 < self.corr_alpha < 1.0:
            raise ValueError(f"corr_alpha must lie in (0, 1), got {self.corr_alpha}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")

    @property
    def bracket(self) -> float:
        return self.sigma**2 + 2.0 * self.corr_alpha - 2.0


@dataclass(frozen=True)
class GaussianJoint:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise ValueError("covariance is not symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-10:
            raise ValueError("covariance is not positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def alpha_star(sigma: float) -> float:
    """Positive root of ``1 - a^2 = sigma^2 a``.

    Written as ``2 / (sigma^2 + sqrt(sigma^4 + 4))`` to avoid cancellation for
    large sigma; algebraically the same as ``(sigma^2/2)(sqrt(1 + 4/sigma^4) - 1)``.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    s2 = float(sigma) ** 2
    return 2.0 / (s2 + math.sqrt(s2 * s2 + 4.0))


def var_xt(t, spec: GaussianCouplingSpec):
    """Variance of the bridge mixture at time ``t``."""
    t = np.asarray(t, dtype=np.float64)
    return 1.0 + t * (1.0 - t) * spec.bracket


def kappa(t, spec: GaussianCouplingSpec):
    t = np.asarray(t, dtype=np.float64)
    a = spec.corr_alpha
    out = (-1.0 + a - t * spec.bracket) / var_xt(t, spec)
    return float(out) if out.ndim == 0 else out


def simpson(fn, a: float, b: float, panels: int) -> float:
    """Composite Simpson rule with ``panels`` (even) subintervals."""
    if panels < 2 or panels % 2:
        raise ValueError("Simpson needs an even number of panels >= 2")
    x = np.linspace(a, b, panels + 1)
    y = np.asarray(fn(x), dtype=np.float64)
    h = (b - a) / panels
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def integrate(fn, a: float, b: float, tol: float = 1e-9, start_panels: int = 16,
              max_panels: int = 1 << 20) -> float:
    """Simpson with panel doubling and one Richardson step, to absolute ``tol``."""
    panels = start_panels
    prev = simpson(fn, a, b, panels)
    while panels < max_panels:
        panels *= 2
        cur = simpson(fn, a, b, panels)
        err = abs(cur - prev) / 15.0
        if err < tol:
            return cur + (cur - prev) / 15.0
        prev = cur
    raise QuadratureError(f"no convergence to {tol:g} with {panels} panels (estimate {err:.3g})")


def integrated_kappa(t: float, spec: GaussianCouplingSpec, tol: float = 1e-9) -> float:
    if t == 0:
        return 0.0
    return integrate(lambda s: kappa(s, spec), 0.0, float(t), tol=tol)


def f_alpha(spec: GaussianCouplingSpec, tol: float = 1e-9) -> float:
    """Endpoint covariance after one Markovian projection of ``N(0, Sigma^alpha)``."""
    return math.exp(integrated_kappa(1.0, spec, tol=tol))


def posterior_mean(x_t, t, spec: GaussianCouplingSpec):
    """``E[X_1 | X_t = x_t]`` under the bridge mixture."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("t must lie in [0, 1]")
    a = spec.corr_alpha
    return (t + (1.0 - t) * a) / var_xt(t, spec) * np.asarray(x_t, dtype=np.float64)


def gaussian_condition(joint: GaussianJoint, observed, value) -> GaussianJoint:
    """Law of the unobserved coordinates given ``x[observed] = value``."""
    observed = np.atleast_1d(np.asarray(observed, dtype=int))
    value = np.atleast_1d(np.asarray(value, dtype=np.float64))
    if value.shape != observed.shape:
        raise ValueError("one observed value per observed index")
    free = np.setdiff1d(np.arange(joint.mean.size), observed)
    s_oo = joint.cov[np.ix_(observed, observed)]
    s_fo = joint.cov[np.ix_(free, observed)]
    s_ff = joint.cov[np.ix_(free, free)]
    if np.linalg.cond(s_oo) > 1e12:
        raise np.linalg.LinAlgError("observed block covariance is singular")
    gain = np.linalg.solve(s_oo, s_fo.T).T
    mean = joint.mean[free] + gain @ (value - joint.mean[observed])
    cov = s_ff - gain @ s_fo.T
    return GaussianJoint(mean, 0.5 * (cov + cov.T))


def bridge_joint(t: float, spec: GaussianCouplingSpec) -> GaussianJoint:
    """Joint law of ``(X_0, X_t, X_1)`` under the bridge mixture."""
    a = spec.corr_alpha
    c_0t = (1.0 - t) + t * a
    c_t1 = t + (1.0 - t) * a
    cov = np.array([
        [1.0, c_0t, a],
        [c_0t, float(var_xt(t, spec)), c_t1],
        [a, c_t1, 1.0],
    ])
    return GaussianJoint(np.zeros(3), cov)


def reference_joint(t: float, sigma: float) -> GaussianJoint:
    """Joint law of ``(X_0, X_t)`` under ``X_0 ~ N(0, 1)`` plus ``sigma * B_t``."""
    return GaussianJoint(np.zeros(2), np.array([[1.0, 1.0], [1.0, 1.0 + sigma**2 * t]]))


def reference_backward_score(x0, x_t, t: float, sigma: float):
    """``d/dx_t log Q(x0 | x_t)`` for the reference started from ``N(0, 1)``."""
    cond = gaussian_condition(reference_joint(t, sigma), [1], [0.0])
    slope = 1.0 / (1.0 + sigma**2 * t)
    var = cond.cov[0, 0]
    return (np.asarray(x0) - slope * np.asarray(x_t)) / var * slope


def prop4_sides(spec: GaussianCouplingSpec, t: float, x_t: float, x1: float):
    """Both sides of the forward/backward score identity at ``(t, x_t, x1)``.

    Left: ``grad log Q_t(x_t) + E_{P(x0 | x1, x_t)}[grad_{x_t} log Q(x0 | x_t)]``.
    Right: ``grad_{x_t} log P(x_t | x1) - grad_{x_t} log Q(x1 | x_t)``.
    """
    if not 0.0 < t < 1.0:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    sigma = spec.sigma
    joint = bridge_joint(t, spec)

    ref_marginal_var = reference_joint(t, sigma).cov[1, 1]
    score_q_t = -x_t / ref_marginal_var
    x0_post = gaussian_condition(joint, [1, 2], [x_t, x1]).mean[0]
    # the backward score is affine in x0, so the expectation only needs the posterior mean
    lhs = score_q_t + float(reference_backward_score(x0_post, x_t, t, sigma))

    xt_given_1 = gaussian_condition(joint, [2], [x1])  # free coordinates are (x0, x_t)
    m, v = xt_given_1.mean[1], xt_given_1.cov[1, 1]
    score_p = -(x_t - m) / v
    score_q_fwd = float(bridge_score(np.array([x1]), np.array([x_t]), t, BridgeSpec(sigma, 1))[0])
    rhs = score_p - score_q_fwd
    return float(lhs), float(rhs)


def prop4_residual(spec: GaussianCouplingSpec, t: float, x_t: float, x1: float) -> float:
    lhs, rhs = prop4_sides(spec, t, x_t, x1)
    return abs(lhs - rhs)


def fixed_point_crossings(sigma: float, grid) -> list[int]:
    """Grid cells ``[grid[i], grid[i+1]]`` where ``f(a) - a`` changes sign."""
    diffs = [f_alpha(GaussianCouplingSpec(float(a), sigma)) - float(a) for a in grid]
    return [i for i in range(len(diffs) - 1) if np.sign(diffs[i]) != np.sign(diffs[i + 1])]
