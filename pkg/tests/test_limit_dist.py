import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, stats

from skewbm.limit_dist import (draw_upsilon, draw_upsilon_many, local_time_density,
                               mu_constant, mu_monte_carlo, mu_table, upsilon_cdf,
                               upsilon_density, upsilon_quantile)
from skewbm.num_core import DomainError, RngStream
from skewbm.stats_harness import ks_one_sample

# 30-digit mpmath quadrature of the same integrals
MU_ORACLE = {
    1: 1.2951463578134134717,
    2: -1.2951463578134134717,
    3: 1.0228745089151410126,
    4: -1.1012187264612641874,
    5: 0.95082394083089318641,
    6: -1.0228745089151410126,
}


def test_mu_against_high_precision():
    for k, v in MU_ORACLE.items():
        val, err = mu_constant(k)
        assert val == pytest.approx(v, abs=1e-11)
        assert err < 1e-9


def test_mu_table_signs_and_identity():
    tab = mu_table(6)
    for k in range(1, 7):
        assert (tab[k] > 0) == (k % 2 == 1)
    assert abs(tab[1] + tab[2]) <= 1e-9
    assert tab.to_csv().splitlines()[0] == "k,mu,err"
    with pytest.raises(DomainError):
        mu_constant(0)


@pytest.mark.parametrize("k", [1, 2, 4])
def test_mu_monte_carlo(k):
    est, se = mu_monte_carlo(k, 10**6, RngStream(31, k))
    assert abs(est - mu_constant(k)[0]) < 3 * se


def test_local_time_sampler_half_normal():
    _, h = draw_upsilon_many(RngStream(32, 0), 10**6)
    assert np.all(h > 0)
    assert ks_one_sample(h, lambda v: np.maximum(2 * stats.norm.cdf(v) - 1, 0)).p_value > 0.01


def test_single_draw():
    s = draw_upsilon(RngStream(1, 0))
    assert s.h > 0 and math.isfinite(s.value)


def test_sampler_symmetric():
    v, _ = draw_upsilon_many(RngStream(33, 0), 10**6)
    assert abs(np.mean(np.sign(v))) < 3 / math.sqrt(v.size)


def test_local_time_density_normalised():
    val, _ = integrate.quad(local_time_density, 0, np.inf)
    assert val == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 2.5, 7.0, 40.0])
def test_density_against_mpmath(x):
    mpmath.mp.dps = 30
    f = lambda y: mpmath.sqrt(y / (2 * mpmath.pi)) * mpmath.exp(-x * x * y / 2) \
        * mpmath.sqrt(2 / mpmath.pi) * mpmath.exp(-y * y / 2)
    ref = float(mpmath.quad(f, [0, 0.1, 1, 5, mpmath.inf]))
    assert upsilon_density(x) == pytest.approx(ref, rel=1e-9, abs=1e-15)
    assert upsilon_density(-x) == upsilon_density(x)


def test_density_normalised():
    # geometric panels out to 1e6, then the x^-3 tail bound integrated exactly
    edges = np.concatenate([[0.0], np.geomspace(0.05, 1e6, 120)])
    total = sum(integrate.quad(upsilon_density, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
                for a, b in zip(edges[:-1], edges[1:]))
    tail = 1.0 / (math.sqrt(2 * math.pi) * 1e12)
    assert 2 * (total + tail) == pytest.approx(1.0, abs=1e-8)


def test_cdf_is_integral_of_density():
    for x in (0.4, 1.5, 6.0):
        val, _ = integrate.quad(upsilon_density, 0, x, epsabs=1e-13)
        assert upsilon_cdf(x) == pytest.approx(0.5 + val, abs=1e-10)
    assert upsilon_cdf(0.0) == 0.5
    np.testing.assert_allclose(upsilon_cdf(np.array([-2.0, 2.0])).sum(), 1.0, atol=1e-15)


def test_cdf_against_sampler():
    v, _ = draw_upsilon_many(RngStream(34, 0), 10**6)
    assert ks_one_sample(v, upsilon_cdf).d < 0.005


@pytest.mark.parametrize("p", [0.1, 0.9, 0.95, 0.99])
def test_quantile_inverse(p):
    assert upsilon_cdf(upsilon_quantile(p)) == pytest.approx(p, abs=1e-8)


def test_quantile_edges():
    assert upsilon_quantile(0.5) == 0.0
    assert upsilon_quantile(0.05) == -upsilon_quantile(0.95)
    for p in (0.0, 1.0, -0.1):
        with pytest.raises(DomainError):
            upsilon_quantile(p)


def test_quantile_against_samples():
    v, _ = draw_upsilon_many(RngStream(35, 0), 10**6)
    q = upsilon_quantile(0.95)
    emp = np.quantile(v, 0.95)
    se = math.sqrt(0.95 * 0.05 / v.size) / upsilon_density(q)
    assert abs(emp - q) < 3 * se
