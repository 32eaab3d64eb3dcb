"""Training couplings for the toy experiments and a log-domain Sinkhorn solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from bridgematch.core import RngStream, draw_normals, draw_uniform, split_stream
from bridgematch.gaussian import GaussianCouplingSpec


@dataclass
class PairedBatch:
    x0s: np.ndarray
    x1s: np.ndarray

    def __post_init__(self):
        self.x0s = np.atleast_2d(np.asarray(self.x0s, dtype=np.float64))
        self.x1s = np.atleast_2d(np.asarray(self.x1s, dtype=np.float64))
        if self.x0s.shape != self.x1s.shape:
            raise ValueError(f"paired arrays differ in shape: {self.x0s.shape} vs {self.x1s.shape}")

    def __len__(self):
        return self.x0s.shape[0]

    @property
    def dim(self) -> int:
        return self.x0s.shape[1]

    def swapped(self) -> "PairedBatch":
        return PairedBatch(self.x1s, self.x0s)

    @classmethod
    def empty(cls, dim: int) -> "PairedBatch":
        return cls(np.zeros((0, dim)), np.zeros((0, dim)))


MarginalSampler = Callable[[int, RngStream], np.ndarray]


def standard_normal_marginal(dim: int) -> MarginalSampler:
    return lambda n, stream: draw_normals(stream, (n, dim))


def gaussian_mixture_marginal(centers, std: float, weights=None) -> MarginalSampler:
    centers = np.asarray(centers, dtype=np.float64)
    w = np.full(len(centers), 1.0 / len(centers)) if weights is None else np.asarray(weights, float)

    def sample(n, stream):
        comp = np.searchsorted(np.cumsum(w), draw_uniform(stream, n), side="right")
        comp = np.minimum(comp, len(centers) - 1)
        return centers[comp] + std * draw_normals(stream, (n, centers.shape[1]))

    return sample


# Crosswise pairing of the two-component mixtures: (-2,-2) -> (2,2), (-2,2) -> (2,-2).
CROSS_SOURCE_CENTERS = np.array([[-2.0, -2.0], [-2.0, 2.0]])
CROSS_TARGET_CENTERS = np.array([[2.0, -2.0], [2.0, 2.0]])
CROSS_PAIRING = (1, 0)


@dataclass
class CouplingSampler:
    """A named coupling: ``sample(n, stream)`` returns paired draws.

    ``target_marginal`` draws from the law of ``x1`` alone; mixture kinds also
    expose their component centers and pairing for the pairing-accuracy metric.
    """

    kind: str
    dim: int
    draw: Callable[[int, RngStream], PairedBatch] = field(repr=False)
    target_marginal: MarginalSampler = field(repr=False)
    params: dict = field(default_factory=dict)
    source_centers: np.ndarray | None = None
    target_centers: np.ndarray | None = None
    pairing: tuple[int, ...] | None = None

    def sample(self, n: int, stream: RngStream) -> PairedBatch:
        if n < 0:
            raise ValueError("n must be >= 0")
        return self.draw(n, stream)

    def reversed(self) -> "CouplingSampler":
        """The same coupling with the roles of ``x0`` and ``x1`` exchanged."""
        draw = self.draw
        inverse = None
        if self.pairing is not None:
            inverse = tuple(int(i) for i in np.argsort(self.pairing))

        def source_marginal(n, stream):
            return draw(n, stream).x0s

        return CouplingSampler(
            self.kind, self.dim, lambda n, s: draw(n, s).swapped(), source_marginal,
            dict(self.params, reversed=True), self.target_centers, self.source_centers, inverse,
        )


def cross_mixture_sampler(n: int, stream: RngStream, component_std: float = 0.2,
                          return_components: bool = False):
    if n < 1:
        raise ValueError("n must be >= 1")
    comp = (draw_uniform(stream, n) >= 0.5).astype(int)
    noise = draw_normals(stream, (2, n, 2))
    x0 = CROSS_SOURCE_CENTERS[comp] + component_std * noise[0]
    x1 = CROSS_TARGET_CENTERS[np.asarray(CROSS_PAIRING)[comp]] + component_std * noise[1]
    batch = PairedBatch(x0, x1)
    return (batch, comp) if return_components else batch


def cross_mixture(component_std: float = 0.2) -> CouplingSampler:
    if not component_std > 0:
        raise ValueError("component_std must be > 0")

    def draw(n, stream):
        return cross_mixture_sampler(n, stream, component_std) if n else PairedBatch.empty(2)

    return CouplingSampler(
        "cross_mixture", 2, draw,
        gaussian_mixture_marginal(CROSS_TARGET_CENTERS, component_std),
        {"component_std": component_std},
        CROSS_SOURCE_CENTERS.copy(), CROSS_TARGET_CENTERS.copy(), CROSS_PAIRING,
    )


def entropic_shift_sampler(base: MarginalSampler, k: float, n: int, stream: RngStream) -> PairedBatch:
    """``x0`` from ``base`` and ``x1 = x0 + k Z``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    x0 = np.atleast_2d(base(n, split_stream(stream, 0)))
    if k == 0:
        return PairedBatch(x0, x0.copy())
    return PairedBatch(x0, x0 + k * draw_normals(split_stream(stream, 1), x0.shape))


def entropic_shift(k: float, centers=None, component_std: float = 0.3) -> CouplingSampler:
    centers = np.array([[2.0, 2.0], [2.0, -2.0], [-2.0, 2.0], [-2.0, -2.0]]) if centers is None \
        else np.asarray(centers, dtype=np.float64)
    base = gaussian_mixture_marginal(centers, component_std)
    dim = centers.shape[1]

    def target(n, stream):
        return entropic_shift_sampler(base, k, n, stream).x1s

    return CouplingSampler(
        "entropic_shift", dim, lambda n, s: entropic_shift_sampler(base, k, n, s), target,
        {"k": k, "component_std": component_std, "centers": centers.tolist()},
    )


def gaussian_corr_sampler(spec: GaussianCouplingSpec, n: int, stream: RngStream) -> PairedBatch:
    """Unit-variance pair with correlation ``corr_alpha``: ``x1 = a x0 + sqrt(1 - a^2) Z``."""
    z = draw_normals(stream, (2, n, 1))
    a = spec.corr_alpha
    return PairedBatch(z[0], a * z[0] + np.sqrt(1.0 - a * a) * z[1])


def gaussian_corr(alpha: float, sigma: float = 1.0) -> CouplingSampler:
    spec = GaussianCouplingSpec(alpha, sigma)
    return CouplingSampler(
        "gaussian_corr", 1, lambda n, s: gaussian_corr_sampler(spec, n, s),
        standard_normal_marginal(1), {"alpha": alpha, "sigma": sigma},
    )


def independent(source: MarginalSampler | None = None, target: MarginalSampler | None = None,
                dim: int = 2) -> CouplingSampler:
    source = source or standard_normal_marginal(dim)
    target = target or standard_normal_marginal(dim)

    def draw(n, stream):
        return PairedBatch(source(n, split_stream(stream, 0)), target(n, split_stream(stream, 1))) \
            if n else PairedBatch.empty(dim)

    return CouplingSampler("independent", dim, draw, target, {"dim": dim})


# -- discrete Schroedinger-bridge oracle ---------------------------------------


class SinkhornError(RuntimeError):
    def __init__(self, message, violation):
        super().__init__(message)
        self.violation = violation


@dataclass
class DiscretePlan:
    row_points: np.ndarray
    col_points: np.ndarray
    plan: np.ndarray
    violations: list[float] = field(default_factory=list)

    def correlation(self) -> float:
        """``sum_ij plan[i, j] x_i y_j`` for scalar supports."""
        x = self.row_points.reshape(len(self.row_points), -1)
        y = self.col_points.reshape(len(self.col_points), -1)
        if x.shape[1] != 1 or y.shape[1] != 1:
            raise ValueError("plan correlation is defined for scalar supports")
        return float(x[:, 0] @ self.plan @ y[:, 0])

    def sample(self, n: int, stream: RngStream) -> PairedBatch:
        """Draw index pairs with probability ``plan[i, j]``."""
        flat = np.cumsum(self.plan.ravel())
        u = draw_uniform(stream, n) * flat[-1]
        idx = np.minimum(np.searchsorted(flat, u, side="right"), flat.size - 1)
        i, j = np.divmod(idx, self.plan.shape[1])
        rows = self.row_points.reshape(len(self.row_points), -1)
        cols = self.col_points.reshape(len(self.col_points), -1)
        return PairedBatch(rows[i], cols[j])


def squared_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = x.reshape(len(x), -1)
    y = y.reshape(len(y), -1)
    return np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=-1)


def sinkhorn(source_points, source_weights, target_points, target_weights, epsilon: float,
             max_iters: int = 10_000, tol: float = 1e-8) -> DiscretePlan:
    """Entropic OT with squared-Euclidean cost, solved with log-domain scaling.

    Each iteration updates the column potential, then the row potential, so the
    returned plan has exact row marginals; iteration stops once the column
    marginal l1 violation drops below ``tol``.
    """
    a = np.asarray(source_weights, dtype=np.float64)
    b = np.asarray(target_weights, dtype=np.float64)
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    for name, w in (("source", a), ("target", b)):
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"{name} weights must be positive and sum to 1")
    xs = np.asarray(source_points, dtype=np.float64)
    ys = np.asarray(target_points, dtype=np.float64)
    cost = squared_distances(xs, ys)
    if cost.shape != (a.size, b.size):
        raise ValueError("weights do not match the number of support points")

    log_kernel = -cost / epsilon
    log_a, log_b = np.log(a), np.log(b)
    f = np.zeros(a.size)  # potentials divided by epsilon
    g = np.zeros(b.size)
    violations = []
    for _ in range(max_iters):
        g = log_b - logsumexp(log_kernel + f[:, None], axis=0)
        f = log_a - logsumexp(log_kernel + g[None, :], axis=1)
        log_plan = log_kernel + f[:, None] + g[None, :]
        col = np.exp(logsumexp(log_plan, axis=0))
        violations.append(float(np.abs(col - b).sum()))
        if violations[-1] < tol:
            return DiscretePlan(xs, ys, np.exp(log_plan), violations)
    raise SinkhornError(
        f"sinkhorn did not reach tol={tol:g} in {max_iters} iterations "
        f"(violation {violations[-1]:.3g})", violations[-1])
