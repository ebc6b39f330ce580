import math

import numpy as np
import pytest

from cireuler.engine import coupled_terminal
from cireuler.logheston import joint_path, logprice_step, piecewise_constant
from cireuler.model import ModelParams, builtin_model
from cireuler.rng import IncrementGrid, SeedSpec, gaussian_increments
from cireuler.schemes import SCHEMES

P = ModelParams(v0=0.04, kappa=5.0, theta=0.04, sigma=0.61, rho=-0.7, mu=0.0)


def test_logprice_step_examples():
    p = ModelParams(0.04, 5.0, 0.04, 0.61, -0.7, mu=0.05)
    assert logprice_step(1.0, 0.0, 0.1, 0.7, -0.3, p) == pytest.approx(1.005, abs=1e-15)
    assert logprice_step(0.0, 0.04, 0.01, 0.1, 0.0, P) == pytest.approx(-0.0142, abs=1e-15)
    q = ModelParams(0.04, 5.0, 0.04, 0.61, 0.0)
    assert logprice_step(2.0, 0.09, 0.01, 1.234, 0.0, q) == pytest.approx(2.0 - 0.09 * 0.01 / 2, abs=1e-15)


def test_logprice_step_rejects_negative_variance():
    with pytest.raises(ValueError):
        logprice_step(0.0, -1e-9, 0.01, 0.0, 0.0, P)


def test_deterministic_drift():
    grid = IncrementGrid(8, 1 / 8, np.zeros(8), np.zeros(8))
    jp = joint_path(SCHEMES["FTE"], P, grid)
    t = np.arange(9) / 8
    assert len(jp.x_hat) == 9
    assert np.allclose(jp.x_hat, math.log(100) - P.theta * t / 2, atol=0, rtol=1e-14)


def test_left_endpoint_rule():
    grid = gaussian_increments(SeedSpec(4, 4), 32)
    jp = joint_path(SCHEMES["HM"], builtin_model(5), grid)
    p = builtin_model(5)
    for k in range(32):
        expect = logprice_step(jp.x_hat[k], jp.v_hat[k], grid.dt, grid.dW[k], grid.dB[k], p)
        assert jp.x_hat[k + 1] == expect


def test_rerun_is_bitwise_identical():
    grid = gaussian_increments(SeedSpec(4, 4), 64)
    a = joint_path(SCHEMES["SE"], builtin_model(1), grid)
    b = joint_path(SCHEMES["SE"], builtin_model(1), gaussian_increments(SeedSpec(4, 4), 64))
    assert np.array_equal(a.x_hat, b.x_hat) and np.array_equal(a.v_hat, b.v_hat)


def test_piecewise_constant():
    vals = np.array([0.0, 1.0, 2.0, 3.0])
    assert piecewise_constant(vals, 1.0, [0.0, 0.2, 1 / 3, 0.99, 1.0]).tolist() == [0, 0, 1, 2, 3]


def test_engine_matches_reference_bitwise():
    schemes = list(SCHEMES.values())
    models = [builtin_model(i) for i in (1, 4, 5)]
    fast = coupled_terminal(schemes, models, 16, 12, 2024)
    slow = coupled_terminal(schemes, models, 16, 12, 2024, backend="python")
    for key in fast:
        assert np.array_equal(fast[key], slow[key]), key
    ref = coupled_terminal(schemes, models, 16, 12, 2024, coupled=False)
    ref_slow = coupled_terminal(schemes, models, 16, 12, 2024, coupled=False, backend="python")
    for key in ref:
        assert np.array_equal(ref[key], ref_slow[key]), key


def _x_mean_error(N, M):
    from cireuler.reference import logprice_mean_exact

    p = builtin_model(5)
    out = coupled_terminal([SCHEMES["AE"]], [p], N // 2, M, 17)
    x = out["x_fine"][0, 0]
    return abs(x.mean() - logprice_mean_exact(p, 1.0)), x.std(ddof=1) / math.sqrt(M)


def test_mean_consistency_improves_with_N():
    # absorption lifts E[v_hat] when nu < 1; the effect on E[x_hat] is visible
    # at N = 16 and has faded by N = 1024
    err_coarse, se_coarse = _x_mean_error(2**4, 100_000)
    err_fine, se_fine = _x_mean_error(2**10, 100_000)
    assert err_coarse > 3 * se_coarse
    assert err_fine < err_coarse
    assert err_fine < 4 * se_fine
