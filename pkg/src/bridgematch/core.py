"""Seeded random streams and small vector helpers.

Streams are Philox generators keyed by a path of integer labels hanging off a
root seed.  A child stream depends only on ``(root seed, label path)``, never on
how many draws the parent has made, so work can be split across paths in any
order and still reproduce.

Gaussian draws use numpy's ziggurat transform of Philox uniforms
(``Generator.standard_normal``).  Bit-exact replay is guaranteed within one
numpy build only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_U64 = (1 << 64) - 1


@dataclass
class RngStream:
    seed_path: tuple[int, ...]
    generator: np.random.Generator = field(repr=False)

    @property
    def root_seed(self) -> int:
        return self.seed_path[0]


def _make_generator(path: tuple[int, ...]) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=path[0], spawn_key=path[1:])
    return np.random.Generator(np.random.Philox(seq))


def _check_u64(value: int, what: str) -> int:
    value = int(value)
    if not 0 <= value <= _U64:
        raise ValueError(f"{what} must be an unsigned 64-bit integer, got {value}")
    return value


def root_stream(seed: int = 0) -> RngStream:
    seed = _check_u64(seed, "seed")
    return RngStream((seed,), _make_generator((seed,)))


def split_stream(parent: RngStream, label: int) -> RngStream:
    """Child stream for ``label``; the parent's state is left untouched."""
    path = parent.seed_path + (_check_u64(label, "label"),)
    return RngStream(path, _make_generator(path))


def split_path(parent: RngStream, *labels: int) -> RngStream:
    stream = parent
    for label in labels:
        stream = split_stream(stream, label)
    return stream


def draw_gaussian(stream: RngStream, dim: int) -> np.ndarray:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return stream.generator.standard_normal(dim)


def draw_normals(stream: RngStream, shape) -> np.ndarray:
    return stream.generator.standard_normal(shape)


def draw_uniform(stream: RngStream, shape=None) -> np.ndarray | float:
    return stream.generator.random(shape)


def as_vec(x, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array, optionally checking its length."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must have at least one component")
    if dim is not None and arr.size != dim:
        raise ValueError(f"{name} has dim {arr.size}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components")
    return arr
