"""Euler discretization of the log-price driven by a CIR scheme."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .rng import IncrementGrid, correlated_increment
from .schemes import CirPath, SchemeSpec, cir_path

__all__ = ["JointPath", "logprice_step", "joint_path", "piecewise_constant"]


@dataclass(frozen=True, eq=False)
class JointPath:
    cir: CirPath
    x_hat: np.ndarray

    @property
    def v_hat(self) -> np.ndarray:
        return self.cir.v_hat

    @property
    def prices(self) -> np.ndarray:
        return np.exp(self.x_hat)


def logprice_step(x_k: float, v_hat_k: float, dt: float, dW: float, dB: float, p: ModelParams) -> float:
    """``x + (mu - v/2) dt + sqrt(v) (rho dW + sqrt(1 - rho^2) dB)``."""
    if v_hat_k < 0.0:
        raise ValueError(f"variance must be non-negative, got {v_hat_k}")
    return x_k + (p.mu - 0.5 * v_hat_k) * dt + math.sqrt(v_hat_k) * correlated_increment(dW, dB, p.rho)


def joint_path(s: SchemeSpec, p: ModelParams, grid: IncrementGrid) -> JointPath:
    """Variance path from ``s`` plus the explicit Euler log-price, which uses
    the variance at the left end of each step."""
    cir = cir_path(s, p, grid)
    x = np.empty(grid.level + 1)
    x[0] = p.x0
    dt = grid.dt
    for k in range(grid.level):
        x[k + 1] = logprice_step(x[k], float(cir.v_hat[k]), dt, float(grid.dW[k]), float(grid.dB[k]), p)
    return JointPath(cir, x)


def piecewise_constant(values: np.ndarray, T: float, t):
    """Evaluate the step path ``t -> values[floor(t N / T)]`` held constant on
    each ``[t_k, t_{k+1})``."""
    n = len(values) - 1
    idx = np.floor(np.asarray(t, dtype=float) * n / T + 1e-12).astype(int)
    return values[np.clip(idx, 0, n)]
