"""Euler schemes for the CIR process built from three fix functions.

One step of every scheme reads::

    vbar[k+1] = f1(vbar[k]) + kappa (theta - f2(vbar[k])) dt + sigma sqrt(f3(vbar[k])) dW[k]
    vhat[k+1] = f3(vbar[k+1])

with ``f1, f2, f3`` drawn from the identity, the positive part and the
absolute value.  Naming follows the literature, where the positive part is
called ``abs`` and the absolute value ``sym``; both spellings are accepted
by :func:`resolve_scheme`.

Admissible triples are

* Case I:  ``f1 = id``, ``f2`` any, ``f3`` in {pos, abs}
* Case II: ``f1 = f2 = f3`` in {pos, abs}

========  ======  ======  ======
scheme    f1      f2      f3
========  ======  ======  ======
AE        x+      x+      x+
SE        |x|     |x|     |x|
HM        x       x       |x|
PTE       x       x       x+
FTE       x       x+      x+
========  ======  ======  ======
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .rng import IncrementGrid

__all__ = [
    "FixFn",
    "SchemeSpec",
    "CirPath",
    "SCHEMES",
    "SCHEME_NAMES",
    "StepSizeWarning",
    "fix_apply",
    "resolve_scheme",
    "cir_step",
    "cir_path",
    "check_step_size",
]


class StepSizeWarning(UserWarning):
    """Step size exceeds ``1 / (2 kappa)``."""


class FixFn(enum.IntEnum):
    IDENTITY = 0
    POSITIVE_PART = 1
    ABSOLUTE_VALUE = 2

    def __call__(self, x):
        return fix_apply(self, x)


_FIX_ALIASES = {
    "id": FixFn.IDENTITY,
    "identity": FixFn.IDENTITY,
    "x": FixFn.IDENTITY,
    "pos": FixFn.POSITIVE_PART,
    "positive": FixFn.POSITIVE_PART,
    "positivepart": FixFn.POSITIVE_PART,
    "abs": FixFn.POSITIVE_PART,  # x^+ in the literature's naming
    "x+": FixFn.POSITIVE_PART,
    "sym": FixFn.ABSOLUTE_VALUE,
    "absolutevalue": FixFn.ABSOLUTE_VALUE,
    "|x|": FixFn.ABSOLUTE_VALUE,
}


def fix_apply(f: FixFn, x):
    """Apply fix function ``f`` to a scalar or an array."""
    if f == FixFn.IDENTITY:
        return x
    if f == FixFn.POSITIVE_PART:
        return np.maximum(x, 0.0) if isinstance(x, np.ndarray) else (x if x > 0.0 else 0.0)
    if f == FixFn.ABSOLUTE_VALUE:
        return abs(x)
    raise ValueError(f"unknown fix function {f!r}")


@dataclass(frozen=True)
class SchemeSpec:
    f1: FixFn
    f2: FixFn
    f3: FixFn
    name: str | None = None

    def __post_init__(self):
        for attr in ("f1", "f2", "f3"):
            object.__setattr__(self, attr, FixFn(getattr(self, attr)))

    @property
    def case(self) -> int | None:
        """1 or 2 for admissible triples, ``None`` otherwise."""
        nonneg = (FixFn.POSITIVE_PART, FixFn.ABSOLUTE_VALUE)
        if self.f1 == FixFn.IDENTITY and self.f3 in nonneg:
            return 1
        if self.f1 == self.f2 == self.f3 and self.f1 in nonneg:
            return 2
        return None

    @property
    def codes(self) -> tuple[int, int, int]:
        return int(self.f1), int(self.f2), int(self.f3)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        short = {FixFn.IDENTITY: "id", FixFn.POSITIVE_PART: "abs", FixFn.ABSOLUTE_VALUE: "sym"}
        return ",".join(short[f] for f in (self.f1, self.f2, self.f3))


_P, _A, _I = FixFn.POSITIVE_PART, FixFn.ABSOLUTE_VALUE, FixFn.IDENTITY

SCHEMES = {
    "AE": SchemeSpec(_P, _P, _P, "AE"),
    "SE": SchemeSpec(_A, _A, _A, "SE"),
    "HM": SchemeSpec(_I, _I, _A, "HM"),
    "PTE": SchemeSpec(_I, _I, _P, "PTE"),
    "FTE": SchemeSpec(_I, _P, _P, "FTE"),
}

SCHEME_NAMES = tuple(SCHEMES)


def resolve_scheme(spec) -> SchemeSpec:
    """Look up a scheme by name (``"FTE"``) or by a triple of fix function
    names (``"id,abs,abs"`` or ``("id", "abs", "abs")``).

    Triples outside Case I / Case II are rejected.
    """
    if isinstance(spec, SchemeSpec):
        scheme = spec
    elif isinstance(spec, str) and spec.upper() in SCHEMES:
        return SCHEMES[spec.upper()]
    else:
        parts = spec.split(",") if isinstance(spec, str) else list(spec)
        if len(parts) != 3:
            raise ValueError(f"unknown scheme {spec!r}; use one of {SCHEME_NAMES} or a triple f1,f2,f3")
        fixes = []
        for part in parts:
            if isinstance(part, FixFn):
                fixes.append(part)
                continue
            key = str(part).strip().lower().replace("_", "").replace(" ", "")
            if key not in _FIX_ALIASES:
                raise ValueError(f"unknown fix function {part!r}")
            fixes.append(_FIX_ALIASES[key])
        scheme = SchemeSpec(*fixes)
        for named in SCHEMES.values():
            if named.codes == scheme.codes:
                return named
    if scheme.case is None:
        raise ValueError(f"triple {scheme.label} is neither a Case I nor a Case II scheme")
    return scheme


@dataclass(frozen=True, eq=False)
class CirPath:
    v_bar: np.ndarray
    v_hat: np.ndarray
    scheme: SchemeSpec

    @property
    def went_negative(self) -> bool:
        return bool(np.any(self.v_bar < 0.0))


def cir_step(s: SchemeSpec, v_bar_k: float, dt: float, dW: float, p: ModelParams) -> tuple[float, float]:
    """One Euler step; returns ``(vbar_next, vhat_next)``."""
    nxt = (
        fix_apply(s.f1, v_bar_k)
        + p.kappa * (p.theta - fix_apply(s.f2, v_bar_k)) * dt
        + p.sigma * math.sqrt(fix_apply(s.f3, v_bar_k)) * dW
    )
    return nxt, fix_apply(s.f3, nxt)


def check_step_size(p: ModelParams, N: int) -> bool:
    """Warn (and return False) when ``T / N > 1 / (2 kappa)``."""
    if p.T / N > 0.5 / p.kappa:
        warnings.warn(
            f"dt = {p.T / N:g} exceeds 1/(2 kappa) = {0.5 / p.kappa:g}",
            StepSizeWarning,
            stacklevel=3,
        )
        return False
    return True


def cir_path(s: SchemeSpec, p: ModelParams, grid: IncrementGrid) -> CirPath:
    """Iterate :func:`cir_step` along ``grid``.

    Plain Python loop; the batched engine in :mod:`cireuler.engine` runs the
    same arithmetic in compiled code.
    """
    if not math.isclose(grid.dt, p.T / grid.level, rel_tol=1e-12):
        raise ValueError(f"grid step {grid.dt} does not match T/N = {p.T / grid.level}")
    n = grid.level
    v_bar = np.empty(n + 1)
    v_hat = np.empty(n + 1)
    v_bar[0] = v_hat[0] = p.v0
    dt = grid.dt
    v = p.v0
    for k in range(n):
        v, vh = cir_step(s, v, dt, float(grid.dW[k]), p)
        v_bar[k + 1] = v
        v_hat[k + 1] = vh
    return CirPath(v_bar, v_hat, s)
