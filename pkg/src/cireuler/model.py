"""Heston / CIR parameter sets.

``ModelParams`` bundles the seven SDE parameters together with the time
horizon.  The five benchmark parameter sets used in the convergence study
are available through :func:`builtin_model`.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields
from pathlib import Path

__all__ = [
    "ModelParams",
    "InvalidModelError",
    "feller_index",
    "builtin_model",
    "validate",
    "load_models",
    "BUILTIN_IDS",
]

PARAM_NAMES = ("v0", "kappa", "theta", "sigma", "rho", "mu", "s0", "T")


class InvalidModelError(ValueError):
    """Raised when a parameter set violates one or more constraints."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the log-Heston model.

    dX = (mu - V/2) dt + sqrt(V) (rho dW + sqrt(1 - rho^2) dB)
    dV = kappa (theta - V) dt + sigma sqrt(V) dW

    The initial log-price ``x0`` is derived from ``s0`` on access.
    """

    v0: float
    kappa: float
    theta: float
    sigma: float
    rho: float
    mu: float = 0.0
    s0: float = 100.0
    T: float = 1.0

    @property
    def x0(self) -> float:
        return math.log(self.s0)

    @property
    def nu(self) -> float:
        return feller_index(self)

    def check(self) -> "ModelParams":
        """Return ``self`` or raise :class:`InvalidModelError`."""
        problems = validate(self)
        if problems:
            raise InvalidModelError(problems)
        return self

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def feller_index(p: ModelParams) -> float:
    """Feller index ``2 kappa theta / sigma^2``."""
    return 2.0 * p.kappa * p.theta / p.sigma**2


def validate(p: ModelParams) -> list[str]:
    """List every violated constraint of ``p``; empty when ``p`` is valid.

    Never raises, whatever the field values are.
    """
    problems = []
    for name in ("v0", "kappa", "theta", "sigma", "s0", "T"):
        value = getattr(p, name, None)
        if not _is_real(value):
            problems.append(f"{name} must be a finite real number")
        elif not value > 0:
            problems.append(f"{name} must be positive")
    rho = getattr(p, "rho", None)
    if not _is_real(rho):
        problems.append("rho must be a finite real number")
    elif not -1.0 <= rho <= 1.0:
        problems.append("rho out of range [-1, 1]")
    mu = getattr(p, "mu", None)
    if not _is_real(mu):
        problems.append("mu must be a finite real number")
    s0 = getattr(p, "s0", None)
    if _is_real(s0) and s0 > 0 and not math.isfinite(math.log(s0)):
        problems.append("log(s0) is not finite")
    return problems


def _is_real(value) -> bool:
    try:
        return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
    except TypeError:
        return False


# v0, kappa, theta, sigma, rho, mu; T=1 and s0=100 throughout.
_TABLE = {
    1: (0.04, 5.0, 0.04, 0.61, -0.7, 0.0319),
    2: (0.0457, 5.07, 0.0457, 0.48, -0.767, 0.0),
    3: (0.04, 2.6, 0.04, 0.2, -0.6, 0.0),
    4: (0.010201, 6.21, 0.019, 0.61, -0.7, 0.0319),
    5: (0.09, 2.0, 0.09, 1.0, -0.3, 0.05),
}

BUILTIN_IDS = tuple(sorted(_TABLE))

# Feller indices as printed alongside the parameter table.
PRINTED_FELLER = {1: "1.075", 2: "2.0113", 3: "5.2", 4: "0.63", 5: "0.36"}


def builtin_model(model_id: int) -> ModelParams:
    """Benchmark parameter set ``model_id`` (1..5), with T=1 and s0=100."""
    try:
        row = _TABLE[int(model_id)]
    except (KeyError, ValueError, TypeError):
        raise ValueError(f"unknown model id {model_id!r}; expected one of {BUILTIN_IDS}") from None
    return ModelParams(*row, s0=100.0, T=1.0)


def load_models(path) -> dict[str, ModelParams]:
    """Read model definitions from an INI-style file.

    Every section other than ``[run]`` defines one model; missing keys fall
    back to the ``ModelParams`` defaults (mu=0, s0=100, T=1)::

        [mymodel]
        v0 = 0.04
        kappa = 1.5
        theta = 0.04
        sigma = 0.3
        rho = -0.5
    """
    parser = configparser.ConfigParser()
    with open(Path(path), encoding="utf-8") as fh:
        parser.read_file(fh)
    models = {}
    for section in parser.sections():
        if section == "run":
            continue
        models[section] = model_from_mapping(parser[section], label=section)
    return models


def model_from_mapping(mapping, label: str = "model") -> ModelParams:
    unknown = set(mapping) - set(PARAM_NAMES)
    if unknown:
        raise InvalidModelError([f"[{label}] unknown key(s): {', '.join(sorted(unknown))}"])
    missing = [k for k in ("v0", "kappa", "theta", "sigma", "rho") if k not in mapping]
    if missing:
        raise InvalidModelError([f"[{label}] missing key(s): {', '.join(missing)}"])
    try:
        values = {k: float(v) for k, v in mapping.items()}
    except ValueError as exc:
        raise InvalidModelError([f"[{label}] {exc}"]) from None
    return ModelParams(**values).check()
