"""Closed-form moments used as validation oracles."""

from __future__ import annotations

import math

from .model import ModelParams

__all__ = [
    "ZETA_HALF",
    "BM_GAP_CONSTANT",
    "cir_mean_exact",
    "cir_variance_exact",
    "logprice_mean_exact",
    "bm_max_mean_exact",
    "bm_max_gap_asymptotic",
]

# zeta(1/2), from the Dirichlet eta series with Borwein acceleration
# (n = 50 terms, exact rational coefficients); agrees with mpmath to 1e-15.
ZETA_HALF = -1.4603545088095868

# sqrt(1 / (2 pi)) |zeta(1/2)|: leading coefficient of the gap between the
# continuous and the discretely sampled Brownian maximum on [0, 1].
BM_GAP_CONSTANT = math.sqrt(1.0 / (2.0 * math.pi)) * abs(ZETA_HALF)


def _check_time(p: ModelParams, t: float) -> None:
    if not 0.0 <= t <= p.T * (1.0 + 1e-12):
        raise ValueError(f"t={t} outside [0, {p.T}]")


def cir_mean_exact(p: ModelParams, t: float) -> float:
    _check_time(p, t)
    return p.theta + (p.v0 - p.theta) * math.exp(-p.kappa * t)


def cir_variance_exact(p: ModelParams, t: float) -> float:
    _check_time(p, t)
    e1 = math.exp(-p.kappa * t)
    s2 = p.sigma**2
    return (p.v0 * s2 / p.kappa) * (e1 - e1 * e1) + (p.theta * s2 / (2.0 * p.kappa)) * (1.0 - e1) ** 2


def logprice_mean_exact(p: ModelParams, t: float) -> float:
    """E[X_t] = x0 + mu t - (1/2) int_0^t E[V_s] ds."""
    _check_time(p, t)
    return (
        p.x0
        + p.mu * t
        - 0.5 * p.theta * t
        - (p.v0 - p.theta) * (1.0 - math.exp(-p.kappa * t)) / (2.0 * p.kappa)
    )


def bm_max_mean_exact(T: float = 1.0) -> float:
    """E[max_{[0,T]} W] = sqrt(2T / pi)."""
    return math.sqrt(2.0 * T / math.pi)


def bm_max_gap_asymptotic(N: int, T: float = 1.0) -> float:
    """First-order gap E[max_{[0,T]} W] - E[max_k W_{t_k}] on ``N`` steps."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return math.sqrt(T / (2.0 * math.pi)) * abs(ZETA_HALF) / math.sqrt(N)
