"""Path-dependent payoffs and their discretization bias.

Payoffs are evaluated on the piecewise-constant extension of the grid
log-price, so the running maximum is the maximum over grid values
(including the terminal one) and the time average is the left-endpoint
Riemann sum.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import engine
from .convergence import _model_label, _is_pow2
from .schemes import check_step_size, resolve_scheme

__all__ = [
    "Payoff",
    "evaluate_payoff",
    "bias_curve",
    "BiasPoint",
    "MemoryCapError",
    "DEFAULT_MEMORY_CAP",
    "write_bias_csv",
    "BIAS_FIELDS",
]

# largest allowed (finest level requested) x (paths)
DEFAULT_MEMORY_CAP = 2**12 * 10**4

BIAS_FIELDS = ("payoff", "scheme", "model", "N", "bias", "se", "seed")

_KINDS = {
    "lookback": "lookback",
    "lookbackput": "lookback",
    "asian": "asian",
    "asianput": "asian",
    "terminal": "terminal",
}


class MemoryCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class Payoff:
    kind: str
    strike: float | None = None

    def __post_init__(self):
        key = self.kind.lower().replace("_", "").replace("-", "")
        if key not in _KINDS:
            raise ValueError(f"unknown payoff {self.kind!r}; choose lookback, asian or terminal")
        object.__setattr__(self, "kind", _KINDS[key])
        if self.kind != "terminal":
            if self.strike is None or not self.strike > 0:
                raise ValueError(f"{self.kind} put needs a positive strike")

    @property
    def label(self) -> str:
        return self.kind if self.kind == "terminal" else f"{self.kind}_put_K{self.strike:g}"


def evaluate_payoff(pay: Payoff, x_path, T: float = 1.0) -> float:
    """Payoff of one grid log-price path ``x_path`` (length N+1)."""
    x = np.asarray(x_path, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("path needs at least two grid values")
    if pay.kind == "terminal":
        return float(x[-1])
    prices = np.exp(x)
    if pay.kind == "lookback":
        return max(pay.strike - float(prices.max()), 0.0)
    # (1/T) sum_{k<N} S_k dt with dt = T/N reduces to the plain average
    return max(pay.strike - float(prices[:-1].mean()), 0.0)


@dataclass(frozen=True)
class BiasPoint:
    N: int
    bias: float
    se: float


def bias_curve(
    scheme,
    model,
    pay: Payoff,
    N_list,
    M: int,
    master_seed: int = 0,
    *,
    ref_N: int | None = None,
    threads: int = 1,
    memory_cap: int = DEFAULT_MEMORY_CAP,
    model_label: str | None = None,
) -> list[BiasPoint]:
    """``E[G(x^(ref_N))] - E[G(x^(N))]`` for each ``N`` on coupled paths.

    Every path is simulated once at ``ref_N`` (default ``2 max(N_list)``)
    and coarsened down to each requested level, so all levels share one
    Brownian path.
    """
    N_list = list(N_list)
    if not N_list:
        return []
    for N in N_list:
        if not _is_pow2(N):
            raise ValueError(f"N must be a power of two, got {N!r}")
    ref = 2 * max(N_list) if ref_N is None else ref_N
    if not _is_pow2(ref) or ref < max(N_list):
        raise ValueError(f"reference level {ref} must be a power of two >= max(N_list)")
    if max(N_list) * M > memory_cap:
        raise MemoryCapError(f"max(N) * M = {max(N_list) * M} exceeds the cap {memory_cap}")
    if M < 2:
        raise ValueError("M must be at least 2")
    s = resolve_scheme(scheme)
    p, _ = _model_label(model, model_label)
    for N in N_list:
        check_step_size(p, N)
    vals = engine.payoff_levels(
        s, p, pay.kind, pay.strike or 0.0, N_list + [ref], ref, M, master_seed, threads=threads
    )
    ref_vals = vals[-1]
    out = []
    for row, N in enumerate(N_list):
        d = ref_vals - vals[row]
        out.append(BiasPoint(int(N), float(np.mean(d)), float(np.std(d, ddof=1) / math.sqrt(M))))
    return out


def write_bias_csv(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BIAS_FIELDS)
        for row in rows:
            w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in BIAS_FIELDS])
