import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from cireuler.model import BUILTIN_IDS, ModelParams, builtin_model
from cireuler.reference import (
    BM_GAP_CONSTANT,
    ZETA_HALF,
    bm_max_gap_asymptotic,
    bm_max_mean_exact,
    cir_mean_exact,
    cir_variance_exact,
    logprice_mean_exact,
)


def borwein_eta(s, n=50):
    """Dirichlet eta via Borwein's acceleration with exact coefficients."""
    d, acc = [], Fraction(0)
    for k in range(n + 1):
        acc += Fraction(n * math.factorial(n + k - 1) * 4**k, math.factorial(n - k) * math.factorial(2 * k))
        d.append(acc)
    total = sum((-1) ** k * float(d[k] - d[n]) / (k + 1) ** s for k in range(n))
    return -total / float(d[n])


def test_zeta_half_oracle():
    zeta = borwein_eta(0.5) / (1 - 2 ** (1 - 0.5))
    assert abs(zeta - ZETA_HALF) < 1e-13
    assert abs(ZETA_HALF) == pytest.approx(1.4603545, abs=1e-7)


def test_gap_asymptotic():
    assert bm_max_gap_asymptotic(1, 1.0) == pytest.approx(0.5825971579, abs=1e-9)
    assert bm_max_gap_asymptotic(1, 1.0) == BM_GAP_CONSTANT
    assert bm_max_gap_asymptotic(2**40) < 1e-6
    assert bm_max_gap_asymptotic(1024) == pytest.approx(BM_GAP_CONSTANT / 32)


def test_bm_max_mean():
    assert bm_max_mean_exact(1.0) == pytest.approx(0.7978845608, abs=1e-9)
    # E|Z| by quadrature of the half-normal density
    val, _ = quad(lambda x: 2 * x * math.exp(-x * x / 2) / math.sqrt(2 * math.pi), 0, math.inf)
    assert val == pytest.approx(bm_max_mean_exact(1.0), abs=1e-9)


def test_cir_mean():
    p = builtin_model(1)
    assert cir_mean_exact(p, 0.0) == p.v0
    assert cir_mean_exact(p, 1.0) == pytest.approx(0.04, abs=1e-15)
    q = ModelParams(0.1, 3.0, 0.04, 0.3, 0.0)
    assert cir_mean_exact(q, 0.0) == pytest.approx(0.1)


@pytest.mark.parametrize("model_id", BUILTIN_IDS)
def test_cir_mean_solves_ode(model_id):
    base = builtin_model(model_id)
    p = replace(base, v0=0.5 * base.v0)
    h = 1e-6
    for t in (0.1, 0.37, 0.8):
        deriv = (cir_mean_exact(p, t + h) - cir_mean_exact(p, t - h)) / (2 * h)
        target = p.kappa * (p.theta - cir_mean_exact(p, t))
        assert deriv == pytest.approx(target, rel=1e-6)


def _moment_ode(p, t_end, h):
    def f(m, q):
        return p.kappa * (p.theta - m), 2 * p.kappa * p.theta * m - 2 * p.kappa * q + p.sigma**2 * m

    m, q = p.v0, p.v0**2
    for _ in range(int(round(t_end / h))):
        a1, b1 = f(m, q)
        a2, b2 = f(m + h / 2 * a1, q + h / 2 * b1)
        a3, b3 = f(m + h / 2 * a2, q + h / 2 * b2)
        a4, b4 = f(m + h * a3, q + h * b3)
        m += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        q += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
    return q - m * m


def test_cir_variance_model3_frozen():
    # RK4 on the first/second moment ODEs with step 1e-6 gave 0.0003059949032551885
    p = builtin_model(3)
    assert cir_variance_exact(p, 1.0) == pytest.approx(0.0003059949032551885, rel=1e-12)
    assert cir_variance_exact(p, 1.0) == pytest.approx(_moment_ode(p, 1.0, 1e-3), rel=1e-9)


def test_cir_variance_limits():
    p = builtin_model(2)
    assert cir_variance_exact(p, 0.0) == 0.0
    long = ModelParams(p.v0, p.kappa, p.theta, p.sigma, p.rho, T=100.0)
    assert cir_variance_exact(long, 100.0) == pytest.approx(p.theta * p.sigma**2 / (2 * p.kappa))


@pytest.mark.parametrize("model_id", BUILTIN_IDS)
def test_cir_variance_nonnegative(model_id):
    p = builtin_model(model_id)
    assert all(cir_variance_exact(p, t) >= 0 for t in np.linspace(0, 1, 101))


def test_logprice_mean():
    p = builtin_model(3)
    assert logprice_mean_exact(p, 0.0) == pytest.approx(p.x0)
    assert logprice_mean_exact(p, 0.5) == pytest.approx(p.x0 - p.theta * 0.25)
    # quadrature of x0 + mu - (1/2) int_0^1 E[V_s] ds gave 4.62827721664184
    q = builtin_model(4)
    assert logprice_mean_exact(q, 1.0) == pytest.approx(4.62827721664184, abs=1e-13)
    integral, _ = quad(lambda s: cir_mean_exact(q, s), 0, 1, epsabs=1e-14)
    assert logprice_mean_exact(q, 1.0) == pytest.approx(q.x0 + q.mu - 0.5 * integral, abs=1e-13)


def test_time_outside_horizon():
    with pytest.raises(ValueError):
        cir_mean_exact(builtin_model(1), 1.5)
