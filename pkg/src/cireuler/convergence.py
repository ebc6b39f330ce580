"""Coupled Monte Carlo error estimates and least-squares rate fitting.

For a level ``N`` the strong error is estimated by the mean absolute
difference between the terminal values at ``N`` and ``2N`` steps, both
computed on the same Brownian path::

    err_v(N) = mean_i |vhat_T^(N) - vhat_T^(2N)|
    err_x(N) = mean_i |xhat_T^(N) - xhat_T^(2N)|

Each table row draws its own fine grid (keyed by the level), so rows are
independent of each other.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import engine
from .model import ModelParams, builtin_model
from .reference import bm_max_gap_asymptotic, bm_max_mean_exact
from .schemes import SchemeSpec, check_step_size, resolve_scheme

__all__ = [
    "ErrorRecord",
    "RateEstimate",
    "FitWarning",
    "estimate_errors",
    "estimate_errors_many",
    "error_table",
    "fit_rate",
    "bm_max_calibration",
    "write_error_csv",
    "read_error_csv",
    "write_rate_csv",
    "read_rate_csv",
    "write_plot_csv",
    "ERROR_FIELDS",
    "RATE_FIELDS",
]

ERROR_FIELDS = ("scheme", "model", "N", "M", "err_v", "se_v", "err_x", "se_x", "seed")
RATE_FIELDS = ("scheme", "model", "target", "slope", "intercept", "fit_min_N", "fit_max_N")


class FitWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ErrorRecord:
    scheme: str
    model: str
    N: int
    M: int
    err_v: float
    err_x: float
    se_v: float
    se_x: float
    seed: int
    # share of paths whose pre-fix variance went negative at either level
    neg_frac: float = field(default=float("nan"), compare=False)

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in ERROR_FIELDS}


@dataclass(frozen=True)
class RateEstimate:
    slope: float
    intercept: float
    fit_range: tuple[int, ...]
    residual_norm: float
    target: str = "v"
    scheme: str = ""
    model: str = ""

    @property
    def fit_min_N(self) -> int:
        return min(self.fit_range)

    @property
    def fit_max_N(self) -> int:
        return max(self.fit_range)

    def predict(self, N):
        """Fitted error ``2^intercept * N^-slope``."""
        return 2.0**self.intercept * np.asarray(N, dtype=float) ** (-self.slope)

    def row(self) -> dict:
        return {
            "scheme": self.scheme,
            "model": self.model,
            "target": self.target,
            "slope": self.slope,
            "intercept": self.intercept,
            "fit_min_N": self.fit_min_N,
            "fit_max_N": self.fit_max_N,
        }


def _is_pow2(n) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and not (n & (n - 1))


def _model_label(model, label=None) -> tuple[ModelParams, str]:
    if isinstance(model, ModelParams):
        return model.check(), label or "custom"
    return builtin_model(model), label or str(int(model))


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    m = values.shape[-1]
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(m)) if m > 1 else float("nan")
    return mean, se


def estimate_errors_many(
    schemes,
    models,
    N: int,
    M: int,
    master_seed: int = 0,
    *,
    threads: int = 1,
    coupled: bool = True,
    backend: str = "numba",
) -> list[ErrorRecord]:
    """Error records for every (scheme, model) pair at level ``N``.

    All pairs share the same increments, so this is much cheaper than
    calling :func:`estimate_errors` pair by pair and gives identical numbers.
    ``models`` holds builtin ids, ModelParams, or ``(label, ModelParams)``.
    """
    if not _is_pow2(N):
        raise ValueError(f"N must be a power of two, got {N!r}")
    if M < 2:
        raise ValueError("M must be at least 2")
    specs = [resolve_scheme(s) for s in schemes]
    resolved = []
    for m in models:
        if isinstance(m, tuple):
            resolved.append(_model_label(m[1], m[0]))
        else:
            resolved.append(_model_label(m))
    for p, _ in resolved:
        check_step_size(p, N)
    out = engine.coupled_terminal(
        specs, [p for p, _ in resolved], N, M, master_seed, threads=threads, coupled=coupled, backend=backend
    )
    dv = np.abs(out["v_coarse"] - out["v_fine"])
    dx = np.abs(out["x_coarse"] - out["x_fine"])
    records = []
    for i, s in enumerate(specs):
        for j, (_, label) in enumerate(resolved):
            err_v, se_v = _mean_se(dv[i, j])
            err_x, se_x = _mean_se(dx[i, j])
            records.append(
                ErrorRecord(
                    scheme=s.label,
                    model=label,
                    N=int(N),
                    M=int(M),
                    err_v=err_v,
                    err_x=err_x,
                    se_v=se_v,
                    se_x=se_x,
                    seed=int(master_seed),
                    neg_frac=float(np.mean(out["negative"][i, j])),
                )
            )
    return records


def estimate_errors(scheme, model, N: int, M: int, master_seed: int = 0, **kwargs) -> ErrorRecord:
    """Coupled estimate of ``err_v(N)`` and ``err_x(N)`` with standard errors."""
    return estimate_errors_many([scheme], [model], N, M, master_seed, **kwargs)[0]


def error_table(scheme, model, N_list, M: int, master_seed: int = 0, **kwargs) -> list[ErrorRecord]:
    return [estimate_errors(scheme, model, N, M, master_seed, **kwargs) for N in N_list]


def fit_rate(table, fit_min_N: int = 2**6, fit_max_N: int = 2**15, target: str = "v") -> RateEstimate:
    """Least-squares fit of ``log2 err = intercept - slope * log2 N``.

    Only records with ``fit_min_N <= N <= fit_max_N`` enter the fit; records
    with zero error are dropped with a :class:`FitWarning`.
    """
    if target not in ("v", "x"):
        raise ValueError("target must be 'v' or 'x'")
    attr = "err_" + target
    pts = [(r.N, getattr(r, attr)) for r in table if fit_min_N <= r.N <= fit_max_N]
    zero = [n for n, e in pts if not e > 0]
    if zero:
        warnings.warn(f"excluding zero-error records at N={zero} from the fit", FitWarning, stacklevel=2)
    pts = [(n, e) for n, e in pts if e > 0]
    if len(pts) < 2:
        raise ValueError(f"need at least 2 usable records in [{fit_min_N}, {fit_max_N}], got {len(pts)}")
    x = np.log2([n for n, _ in pts])
    y = np.log2([e for _, e in pts])
    A = np.column_stack([x, np.ones_like(x)])
    (coef, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.linalg.norm(y - A @ np.array([coef, icpt])))
    first = table[0] if table else None
    return RateEstimate(
        slope=float(-coef),
        intercept=float(icpt),
        fit_range=tuple(int(n) for n, _ in pts),
        residual_norm=resid,
        target=target,
        scheme=getattr(first, "scheme", ""),
        model=getattr(first, "model", ""),
    )


def bm_max_calibration(N: int, M: int, master_seed: int = 0, *, T: float = 1.0, threads: int = 1):
    """Monte Carlo mean (and its standard error) of the discretely sampled
    Brownian maximum ``max_k W_{t_k}`` on ``N`` steps of [0, T].

    The shortfall ``sqrt(2T/pi) - estimate`` should be close to
    :func:`~cireuler.reference.bm_max_gap_asymptotic` for large ``N``.
    """
    values = engine.bm_discrete_max(N, M, master_seed, T=T, threads=threads)
    estimate, se = _mean_se(values)
    exact = bm_max_mean_exact(T)
    if estimate > exact + 4.0 * se:
        warnings.warn(
            f"discrete maximum {estimate:.6f} exceeds the continuous one {exact:.6f} by more than 4 se",
            RuntimeWarning,
            stacklevel=2,
        )
    return estimate, se


def calibration_report(N_list, M, master_seed=0, *, T=1.0, threads=1) -> list[dict]:
    rows = []
    exact = bm_max_mean_exact(T)
    for N in N_list:
        est, se = bm_max_calibration(N, M, master_seed, T=T, threads=threads)
        asym = bm_max_gap_asymptotic(N, T)
        gap = exact - est
        rows.append({"N": N, "estimate": est, "se": se, "gap": gap, "asymptotic": asym, "ratio": gap / asym})
    return rows


# -- CSV ---------------------------------------------------------------------


def _fmt(value):
    return repr(value) if isinstance(value, float) else str(value)


def _write(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in header])


def write_error_csv(path, records) -> None:
    _write(path, ERROR_FIELDS, [r.row() for r in records])


def read_error_csv(path) -> list[ErrorRecord]:
    types = {f.name: f.type for f in fields(ErrorRecord)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for k, v in row.items():
                kind = types[k]
                kw[k] = int(v) if kind == "int" else float(v) if kind == "float" else v
            out.append(ErrorRecord(**kw))
    return out


def write_rate_csv(path, rates) -> None:
    _write(path, RATE_FIELDS, [r.row() for r in rates])


def read_rate_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            {**row, "slope": float(row["slope"]), "intercept": float(row["intercept"]),
             "fit_min_N": int(row["fit_min_N"]), "fit_max_N": int(row["fit_max_N"])}
            for row in csv.DictReader(fh)
        ]


def write_plot_csv(path, records) -> None:
    """log2 columns, ready for an external plotting tool."""
    rows = [
        {
            "scheme": r.scheme,
            "model": r.model,
            "log2_N": math.log2(r.N),
            "log2_err_v": math.log2(r.err_v) if r.err_v > 0 else float("-inf"),
            "log2_err_x": math.log2(r.err_x) if r.err_x > 0 else float("-inf"),
        }
        for r in records
    ]
    _write(path, ("scheme", "model", "log2_N", "log2_err_v", "log2_err_x"), rows)
