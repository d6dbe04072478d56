import math

import numpy as np
import pytest
from scipy import integrate, stats

from skewbm.likelihood import transition_density
from skewbm.num_core import DomainError, RngStream, normal_cdf
from skewbm.sbm_sim import (GridPath, SbmParams, local_time_proxy, sbm_transition,
                            simulate_path)
from skewbm.stats_harness import ks_one_sample


def q_cdf(y, theta, x, delta):
    """Closed-form CDF of q_theta(delta, x, .), x >= 0."""
    y = np.asarray(y, dtype=float)
    sd = math.sqrt(delta)
    base = normal_cdf((y - x) / sd)
    neg = -theta * normal_cdf((y - abs(x)) / sd)
    at0 = normal_cdf(-x / sd) - theta * normal_cdf(-abs(x) / sd)
    pos = at0 + (normal_cdf((y - x) / sd) - normal_cdf(-x / sd)) \
        + theta * (normal_cdf((abs(x) + y) / sd) - normal_cdf(abs(x) / sd))
    return np.where(y < 0, base + neg, pos)


GRID = [(th, x, d) for th in (-0.8, 0.0, 0.5, 1.0) for x in (0.0, 0.3) for d in (0.01, 1.0)]


@pytest.mark.parametrize("theta,x,delta", GRID)
def test_density_normalised(theta, x, delta):
    f = lambda y: transition_density(theta, delta, x, y)
    sd = math.sqrt(delta)
    lo, _ = integrate.quad(f, -np.inf, 0.0, epsabs=1e-13, epsrel=1e-13)
    hi, _ = integrate.quad(f, 0.0, x, epsabs=1e-13) if x > 0 else (0.0, 0.0)
    up, _ = integrate.quad(f, x, np.inf, epsabs=1e-13, epsrel=1e-13)
    assert lo + hi + up == pytest.approx(1.0, abs=1e-10)
    # closed-form CDF against quadrature at a few points
    for y in (-2 * sd, -0.5 * sd, 0.5 * sd + x, x + 2 * sd):
        if y <= 0:
            val = integrate.quad(f, -np.inf, y, epsabs=1e-12, limit=200)[0]
        else:
            val = lo + integrate.quad(f, 0.0, y, epsabs=1e-13)[0]
        assert q_cdf(y, theta, x, delta) == pytest.approx(val, abs=1e-9)


def test_density_examples():
    assert transition_density(0.0, 0.5, 0.2, 0.7) == pytest.approx(
        stats.norm.pdf(0.5, scale=math.sqrt(0.5)), rel=1e-14)
    assert transition_density(1.0, 0.3, 1.0, -1.0) == pytest.approx(0.0, abs=1e-16)
    assert transition_density(0.5, 1.0, 0.0, 1.0) == pytest.approx(1.5 * stats.norm.pdf(1.0), rel=1e-14)


def test_transition_theta_zero_is_gaussian():
    y = sbm_transition(np.full(10**5, 0.3), 0.0, 0.1, RngStream(5, 0))
    assert ks_one_sample(y, lambda v: normal_cdf((v - 0.3) / math.sqrt(0.1))).p_value > 0.01


def test_transition_theta_one_reflects():
    y = sbm_transition(np.zeros(10**5), 1.0, 0.5, RngStream(5, 1))
    assert np.all(y >= 0)
    assert ks_one_sample(y, lambda v: 2 * normal_cdf(v / math.sqrt(0.5)) - 1).p_value > 0.01


def test_transition_matches_quadrature_cdf():
    y = sbm_transition(np.full(10**5, 0.3), 0.5, 0.1, RngStream(5, 2))
    assert ks_one_sample(y, lambda v: q_cdf(v, 0.5, 0.3, 0.1)).d < 0.006


def test_transition_negative_start_is_mirrored():
    a = sbm_transition(np.full(5, -0.3), 0.4, 0.1, RngStream(5, 3))
    b = sbm_transition(np.full(5, 0.3), -0.4, 0.1, RngStream(5, 3))
    np.testing.assert_array_equal(a, -b)


def test_transition_bad_theta():
    with pytest.raises(DomainError):
        sbm_transition(0.0, 1.5, 0.1, RngStream(0, 0))


def test_params_validation():
    for kw in ({"theta": 2}, {"x0": -1}, {"T": 0}, {"n": 0}, {"n": 2.5}):
        with pytest.raises(DomainError):
            SbmParams(**kw)


@pytest.mark.parametrize("theta", [-0.6, 0.0, 0.7])
def test_bm_and_chain_methods_agree_in_law(theta):
    # the marginal at T and the number of sign changes, compared across methods
    p = SbmParams(theta, 0.1, 1.0, 20)
    bm = np.array([simulate_path(p, RngStream(11, i)).values for i in range(4000)])
    ch = np.array([simulate_path(p, RngStream(12, i), method="chain").values for i in range(4000)])
    for col in (5, 20):
        assert stats.ks_2samp(bm[:, col], ch[:, col]).pvalue > 0.001
    flips = lambda v: (np.diff(np.sign(v), axis=1) != 0).sum(axis=1)
    assert stats.ks_2samp(flips(bm), flips(ch)).pvalue > 0.001


def test_terminal_law_matches_density():
    p = SbmParams(0.5, 0.3, 1.0, 50)
    end = np.array([simulate_path(p, RngStream(13, i)).values[-1] for i in range(20000)])
    assert ks_one_sample(end, lambda v: q_cdf(v, 0.5, 0.3, 1.0)).p_value > 0.001


def test_reflected_when_theta_one():
    path = simulate_path(SbmParams(1.0, 0.0, 1.0, 1000), RngStream(1, 1))
    assert np.all(path.values >= 0) and not path.crossed


def test_crossing_frequency():
    p = SbmParams(0.0, 0.0, 1.0, 10**4)
    crossed = [simulate_path(p, RngStream(14, i)).crossed for i in range(1000)]
    assert np.mean(crossed) >= 0.99


def test_deterministic():
    p = SbmParams(0.3, 0.0, 1.0, 500)
    a = simulate_path(p, RngStream(1, 2)).values
    b = simulate_path(p, RngStream(1, 2)).values
    np.testing.assert_array_equal(a, b)


def test_local_time_zero_far_from_origin():
    n = 100
    path = GridPath(SbmParams(0.0, 1.0, 1.0, n), np.full(n + 1, 1.0))
    assert local_time_proxy(path) == 0.0


def test_local_time_proxy_half_normal():
    # the local time at 0 of a Brownian motion on [0, 1] is half-normal
    p = SbmParams(0.0, 0.0, 1.0, 10**5)
    lt = [local_time_proxy(simulate_path(p, RngStream(15, i))) for i in range(1500)]
    assert ks_one_sample(lt, lambda v: np.maximum(2 * normal_cdf(v) - 1, 0)).p_value > 0.001


def test_csv_round_trip():
    path = simulate_path(SbmParams(-0.4, 0.2, 2.0, 50), RngStream(3, 3))
    back = GridPath.from_csv(path.to_csv())
    np.testing.assert_array_equal(back.values, path.values)
    assert back.params == path.params


def test_csv_rejects_negative_start():
    text = "i,t,x\n0,0,-1\n1,1,0.5\n"
    with pytest.raises(DomainError):
        GridPath.from_csv(text)


def test_mirror():
    path = simulate_path(SbmParams(0.4, 0.0, 1.0, 20), RngStream(3, 4))
    m = path.mirrored()
    np.testing.assert_array_equal(m.values, -path.values)
    assert m.params.theta == -0.4
