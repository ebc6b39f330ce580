"""Counter-based Brownian increments on dyadic grids.

Each standard normal is the inverse normal CDF of one 64-bit Philox output.
The Philox key is ``(master_seed, path_index)`` and the 256-bit counter is
``(block, stream, level, 0)``, so the increment stream of any path at any
level is reproducible in isolation, without generating other paths first.

Coarser grids are always derived from a finer one with :func:`coarsen`; this
is what couples a coarse and a fine discretization to the same Brownian path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = [
    "DEFAULT_SEED",
    "SeedSpec",
    "IncrementGrid",
    "standard_normals",
    "normal_block",
    "gaussian_increments",
    "coarsen",
    "coarsen_array",
    "correlated_increment",
]

DEFAULT_SEED = 0

STREAM_W = 0
STREAM_B = 1

_MASK64 = (1 << 64) - 1
_TO_UNIT = 2.0**-53


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int = DEFAULT_SEED
    path_index: int = 0

    def __post_init__(self):
        if self.path_index < 0:
            raise ValueError("path_index must be non-negative")


@dataclass(frozen=True, eq=False)
class IncrementGrid:
    """Brownian increments of ``W`` (variance driver) and ``B`` (independent
    price driver) on ``level`` equidistant steps of size ``dt``."""

    level: int
    dt: float
    dW: np.ndarray
    dB: np.ndarray

    def __post_init__(self):
        if self.dW.shape != (self.level,) or self.dB.shape != (self.level,):
            raise ValueError("increment arrays must have length equal to level")

    @property
    def T(self) -> float:
        return self.level * self.dt

    def __eq__(self, other):
        if not isinstance(other, IncrementGrid):
            return NotImplemented
        return (
            self.level == other.level
            and self.dt == other.dt
            and np.array_equal(self.dW, other.dW)
            and np.array_equal(self.dB, other.dB)
        )


def standard_normals(master_seed: int, path_index: int, stream: int, level: int, n: int) -> np.ndarray:
    """``n`` standard normals for one (path, stream, level) triple."""
    key = np.array([master_seed & _MASK64, path_index & _MASK64], dtype=np.uint64)
    counter = np.array([0, stream, level, 0], dtype=np.uint64)
    raw = np.random.Philox(key=key, counter=counter).random_raw(n)
    # 53 high bits mapped to the open interval (0, 1)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TO_UNIT
    return ndtri(u)


def normal_block(master_seed: int, paths, level: int, streams=(STREAM_W, STREAM_B)) -> list[np.ndarray]:
    """Standard normals for a block of paths, one ``(len(paths), level)``
    array per requested stream."""
    paths = list(paths)
    out = [np.empty((len(paths), level)) for _ in streams]
    for row, path in enumerate(paths):
        for arr, stream in zip(out, streams):
            arr[row] = standard_normals(master_seed, path, stream, level, level)
    return out


def gaussian_increments(seed: SeedSpec, N: int, T: float = 1.0) -> IncrementGrid:
    """Increments of ``(W, B)`` for one path on ``N`` steps over ``[0, T]``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if not T > 0:
        raise ValueError("T must be positive")
    dt = T / N
    sdt = math.sqrt(dt)
    dW = sdt * standard_normals(seed.master_seed, seed.path_index, STREAM_W, N, N)
    dB = sdt * standard_normals(seed.master_seed, seed.path_index, STREAM_B, N, N)
    return IncrementGrid(N, dt, dW, dB)


def coarsen_array(fine: np.ndarray) -> np.ndarray:
    """Pairwise sums ``fine[..., 2k] + fine[..., 2k+1]`` along the last axis."""
    if fine.shape[-1] % 2:
        raise ValueError("cannot coarsen an odd number of steps")
    return fine[..., 0::2] + fine[..., 1::2]


def coarsen(fine: IncrementGrid) -> IncrementGrid:
    """Halve the resolution of ``fine``; each coarse increment is the sum of
    its two children, left then right."""
    if fine.level % 2:
        raise ValueError(f"cannot coarsen a grid with odd level {fine.level}")
    return IncrementGrid(fine.level // 2, 2.0 * fine.dt, coarsen_array(fine.dW), coarsen_array(fine.dB))


def correlated_increment(dW, dB, rho: float):
    """Increment of ``rho W + sqrt(1 - rho^2) B``; works element-wise on arrays."""
    return rho * dW + math.sqrt(1.0 - rho * rho) * dB
