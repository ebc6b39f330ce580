"""Euler-type discretizations of the CIR variance process and the log-Heston
SDE, with coupled Monte Carlo estimates of their strong convergence rates."""

__version__ = "0.1.0"

from .model import ModelParams, builtin_model, feller_index, validate
from .rng import SeedSpec, IncrementGrid, gaussian_increments, coarsen, correlated_increment
from .schemes import FixFn, SchemeSpec, SCHEMES, fix_apply, resolve_scheme, cir_step, cir_path
from .logheston import joint_path, logprice_step
from .convergence import ErrorRecord, RateEstimate, estimate_errors, error_table, fit_rate, bm_max_calibration
from .payoffs import Payoff, evaluate_payoff, bias_curve

__all__ = [
    "ModelParams", "builtin_model", "feller_index", "validate",
    "SeedSpec", "IncrementGrid", "gaussian_increments", "coarsen", "correlated_increment",
    "FixFn", "SchemeSpec", "SCHEMES", "fix_apply", "resolve_scheme", "cir_step", "cir_path",
    "joint_path", "logprice_step",
    "ErrorRecord", "RateEstimate", "estimate_errors", "error_table", "fit_rate", "bm_max_calibration",
    "Payoff", "evaluate_payoff", "bias_curve",
]
