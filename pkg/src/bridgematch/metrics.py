"""Statistics for generated couplings: pairing accuracy, energy distance, covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bridgematch.couplings import PairedBatch

_ED_CHUNK = 1024


@dataclass
class CouplingReport:
    pairing_accuracy: float | None
    energy_distance_marginal: float
    empirical_cov: np.ndarray
    endpoint_mse: float | None = None
    n: int = 0

    def as_dict(self) -> dict:
        out = {
            "n": self.n,
            "pairing_accuracy": self.pairing_accuracy,
            "energy_distance_marginal": self.energy_distance_marginal,
            "endpoint_mse": self.endpoint_mse,
        }
        cov = np.atleast_2d(self.empirical_cov)
        for i in range(cov.shape[0]):
            for j in range(cov.shape[1]):
                out[f"cov_{i}_{j}"] = float(cov[i, j])
        return out

    def as_text(self) -> str:
        lines = []
        for key, value in self.as_dict().items():
            lines.append(f"{key}={'NA' if value is None else repr(value)}")
        return "\n".join(lines) + "\n"


def nearest_center(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=-1)
    return np.argmin(d2, axis=1)


def pairing_accuracy(generated: PairedBatch, source_centers, target_centers, pairing_map) -> float:
    """Fraction of pairs whose endpoint lands in the partner of the start's component."""
    if len(generated) == 0:
        raise ValueError("empty batch")
    pairing_map = np.asarray(pairing_map, dtype=int)
    if sorted(pairing_map.tolist()) != list(range(len(target_centers))) or \
            len(pairing_map) != len(source_centers):
        raise ValueError("pairing_map must be a bijection between component indices")
    src = nearest_center(generated.x0s, source_centers)
    tgt = nearest_center(generated.x1s, target_centers)
    return float(np.mean(tgt == pairing_map[src]))


def _mean_pairwise_distance(a: np.ndarray, b: np.ndarray) -> float:
    total = 0.0
    for start in range(0, len(a), _ED_CHUNK):
        block = a[start:start + _ED_CHUNK]
        d = np.sqrt(np.sum((block[:, None, :] - b[None, :, :]) ** 2, axis=-1))
        total += float(d.sum())
    return total / (len(a) * len(b))


def energy_distance(a, b) -> float:
    """``2 E|A - B| - E|A - A'| - E|B - B'|`` with all pairs, diagonal included.

    Arguments are put in a canonical order first so that swapping them gives a
    bit-identical result.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a = a.reshape(len(a), -1)
    b = b.reshape(len(b), -1)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("energy distance needs nonempty samples")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if (len(a), a.tobytes()) > (len(b), b.tobytes()):
        a, b = b, a
    return 2.0 * _mean_pairwise_distance(a, b) - _mean_pairwise_distance(a, a) - _mean_pairwise_distance(b, b)


def empirical_cov(batch: PairedBatch) -> np.ndarray:
    """Unbiased cross-covariance ``Cov(x0_i, x1_j)`` as a ``d x d`` matrix."""
    n = len(batch)
    if n < 2:
        raise ValueError("empirical_cov needs at least two pairs")
    c0 = batch.x0s - batch.x0s.mean(axis=0)
    c1 = batch.x1s - batch.x1s.mean(axis=0)
    return c0.T @ c1 / (n - 1)


def endpoint_mse(generated, reference) -> float:
    generated = np.asarray(generated, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if generated.shape != reference.shape:
        raise ValueError(f"length/shape mismatch: {generated.shape} vs {reference.shape}")
    generated = generated.reshape(len(generated), -1)
    reference = reference.reshape(len(reference), -1)
    return float(np.mean(np.sum((generated - reference) ** 2, axis=1)))


def coupling_report(generated: PairedBatch, target_sample, source_centers=None,
                    target_centers=None, pairing_map=None, reference_x1s=None) -> CouplingReport:
    accuracy = None
    if source_centers is not None:
        accuracy = pairing_accuracy(generated, source_centers, target_centers, pairing_map)
    mse = None if reference_x1s is None else endpoint_mse(generated.x1s, reference_x1s)
    return CouplingReport(
        pairing_accuracy=accuracy,
        energy_distance_marginal=energy_distance(generated.x1s, target_sample),
        empirical_cov=empirical_cov(generated),
        endpoint_mse=mse,
        n=len(generated),
    )
