import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from cireuler.convergence import error_table, fit_rate
from cireuler.engine import payoff_levels
from cireuler.logheston import joint_path
from cireuler.model import ModelParams, builtin_model
from cireuler.payoffs import MemoryCapError, Payoff, bias_curve, evaluate_payoff
from cireuler.reference import BM_GAP_CONSTANT
from cireuler.rng import SeedSpec, coarsen, gaussian_increments
from cireuler.schemes import SCHEMES


def test_constant_paths():
    x = np.full(11, math.log(100.0))
    assert evaluate_payoff(Payoff("lookback", 90), x) == 0.0
    assert evaluate_payoff(Payoff("asian", 110), x) == pytest.approx(10.0)
    assert evaluate_payoff(Payoff("terminal"), x) == pytest.approx(math.log(100.0))


def test_hand_evaluated_path():
    x = [0.0, math.log(2.0), 0.0]
    assert evaluate_payoff(Payoff("lookback", 3), x) == pytest.approx(1.0)
    assert evaluate_payoff(Payoff("asian", 3), x) == pytest.approx(1.5)


def test_payoff_validation():
    with pytest.raises(ValueError):
        Payoff("lookback")
    with pytest.raises(ValueError):
        Payoff("asian", -1)
    with pytest.raises(ValueError):
        Payoff("barrier", 100)
    with pytest.raises(ValueError):
        evaluate_payoff(Payoff("terminal"), [1.0])


paths = st.lists(st.floats(-2, 2, allow_nan=False), min_size=2, max_size=20)


@settings(max_examples=1000)
@given(paths, st.data(), st.floats(0.1, 10))
def test_lipschitz_in_price(y, data, K):
    z = data.draw(st.lists(st.floats(-2, 2, allow_nan=False), min_size=len(y), max_size=len(y)))
    bound = np.max(np.abs(np.exp(y) - np.exp(z)))
    for kind in ("lookback", "asian"):
        pay = Payoff(kind, K)
        gy, gz = evaluate_payoff(pay, y), evaluate_payoff(pay, z)
        assert abs(gy - gz) <= bound + 1e-12
        assert 0.0 <= gy <= K


@pytest.mark.parametrize("kind", ["lookback", "asian", "terminal"])
def test_kernel_matches_reference_payoff(kind):
    p = builtin_model(5)
    pay = Payoff(kind, 105.0 if kind != "terminal" else None)
    vals = payoff_levels(SCHEMES["SE"], p, kind, pay.strike or 0.0, [8, 32], 32, 6, 12)
    for i in range(6):
        fine = gaussian_increments(SeedSpec(12, i), 32)
        coarse = coarsen(coarsen(fine))
        for row, grid in enumerate((coarse, fine)):
            x = joint_path(SCHEMES["SE"], p, grid).x_hat
            assert vals[row, i] == pytest.approx(evaluate_payoff(pay, x), rel=1e-12, abs=1e-12)


def test_bias_curve_empty_and_identical():
    assert bias_curve("FTE", 1, Payoff("lookback", 110), [], 100) == []
    pts = bias_curve("FTE", 1, Payoff("asian", 100), [64], 200, ref_N=64)
    assert pts[0].bias == 0.0 and pts[0].se == 0.0


def test_bias_curve_guards():
    with pytest.raises(MemoryCapError):
        bias_curve("FTE", 1, Payoff("lookback", 110), [2**12], 10**4 + 1)
    with pytest.raises(ValueError):
        bias_curve("FTE", 1, Payoff("lookback", 110), [12], 100)
    with pytest.raises(ValueError):
        bias_curve("FTE", 1, Payoff("lookback", 110), [64], 100, ref_N=32)


def test_bias_curve_deterministic():
    a = bias_curve("HM", 2, Payoff("asian", 100), [8, 16], 500, 3)
    b = bias_curve("HM", 2, Payoff("asian", 100), [8, 16], 500, 3)
    assert a == b


def _slope(points):
    x = np.log2([p.N for p in points])
    y = np.log2([abs(p.bias) for p in points])
    return -np.polyfit(x, y, 1)[0]


def test_terminal_bias_not_slower_than_strong_rate():
    # model 5 / AE: the absorption bias in E[x_hat] is well above the noise
    Ns = [8, 16, 32, 64, 128]
    pts = bias_curve("AE", 5, Payoff("terminal"), Ns, 10**4, 5, ref_N=2048)
    strong = fit_rate(error_table("AE", 5, Ns, 10**4, 5), 8, 128, "x").slope
    assert _slope(pts) >= strong - 0.15


def test_lookback_bias_follows_brownian_max_gap():
    # sigma ~ 0 and v0 = theta: the log-price is a Brownian motion with
    # volatility sqrt(theta) and the lookback bias inherits the discrete-max gap
    p = ModelParams(v0=0.04, kappa=1.0, theta=0.04, sigma=1e-8, rho=-0.5)
    K, ref = 110.0, 4096
    Ns = [4, 8, 16, 32, 64, 128]
    pts = bias_curve("FTE", p, Payoff("lookback", K), Ns, 10**4, 5, ref_N=ref)
    assert 0.25 <= _slope(pts) <= 1.0
    p_below = 2 * norm.cdf(math.log(K / p.s0) / math.sqrt(p.theta)) - 1
    for pt in pts[-3:]:
        pred = p.s0 * math.sqrt(p.theta) * BM_GAP_CONSTANT * (pt.N**-0.5 - ref**-0.5) * p_below
        assert 0.5 <= abs(pt.bias) / pred <= 2.0
