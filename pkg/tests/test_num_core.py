import hashlib
import math
import threading

import numpy as np
import pytest

from skewbm.num_core import (DivergenceError, DomainError, RngStream, draw_exponential,
                             draw_gaussian, gauss_tail_integrand, integrate_semi_infinite,
                             log_normal_sf, normal_cdf, normal_pdf, ols_slope)

# 40-digit mpmath quadrature of exp(4x^2/9) Phi(-x) over [0, inf)
EXP_GAUSS_TAIL = 0.7458926955158221735
# log(1 - Phi(40)) at 40 digits
LOG_SF_40 = -804.60844201375378817
# sha256 of the first 100 gaussians of RngStream(1, 7), float64 native bytes
GAUSS_SHA = "97308f77b6aef9ddf23b6950c4a70ea908630c6ae5988d0e13b7b52cfc46ddfe"


def test_normal_pdf_values():
    assert normal_pdf(0, 1) == pytest.approx(0.3989422804014327, abs=1e-16)
    assert normal_pdf(1, 1) == pytest.approx(0.24197072451914337, abs=1e-16)
    assert normal_pdf(2, 4) == pytest.approx(normal_pdf(1, 1) / 2, rel=1e-15)


def test_normal_pdf_bad_variance():
    with pytest.raises(DomainError):
        normal_pdf(0.0, 0.0)
    with pytest.raises(DomainError):
        normal_pdf(0.0, -1.0)


def test_normal_cdf_symmetry():
    assert normal_cdf(0.0) == 0.5
    x = np.linspace(-8, 8, 101)
    np.testing.assert_allclose(normal_cdf(x) + normal_cdf(-x), 1.0, atol=1e-15)


def test_log_normal_sf_far_tail():
    v = log_normal_sf(40.0)
    assert math.isfinite(v)
    assert v == pytest.approx(LOG_SF_40, rel=1e-13)


def test_quad_half_normal_mean():
    res = integrate_semi_infinite(*gauss_tail_integrand(0.0), log_form=True)
    assert res.value == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-12)


def test_quad_exponential():
    res = integrate_semi_infinite(lambda x: math.exp(-x), lambda x: math.exp(-x))
    assert res.value == pytest.approx(1.0, abs=1e-12)


def test_quad_growing_gaussian_factor():
    res = integrate_semi_infinite(*gauss_tail_integrand(4.0 / 9.0), log_form=True)
    err = abs(res.value - EXP_GAUSS_TAIL)
    assert err < 1e-11
    assert res.abs_error_bound >= err


def test_quad_divergent():
    with pytest.raises(DivergenceError):
        gauss_tail_integrand(0.5)


def test_rng_frozen_values():
    v = RngStream(1, 7).gaussian(100)
    assert hashlib.sha256(v.tobytes()).hexdigest() == GAUSS_SHA


def test_rng_streams_differ():
    a = RngStream(1, 7).gaussian(10)
    b = RngStream(1, 8).gaussian(10)
    c = RngStream(2, 7).gaussian(10)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def test_rng_same_across_threads():
    out = [None] * 4

    def work(i):
        out[i] = RngStream(1, 7).gaussian(100).tobytes()

    threads = [threading.Thread(target=work, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(out)) == 1


def test_exponential_mean():
    x = draw_exponential(RngStream(3, 0), 0.5, 10**6)
    assert x.mean() == pytest.approx(2.0, abs=0.01)


def test_gaussian_variance():
    x = draw_gaussian(RngStream(3, 1), 10**6)
    assert x.var(ddof=1) == pytest.approx(1.0, abs=0.01)


def test_ols_exact_line():
    slope, intercept, r2 = ols_slope([0, 1, 2], [1, 3, 5])
    assert slope == pytest.approx(2.0, abs=1e-14)
    assert intercept == pytest.approx(1.0, abs=1e-14)
    assert r2 == pytest.approx(1.0, abs=1e-14)


def test_ols_constant_ys():
    slope, _, _ = ols_slope([0, 1, 2, 5], [3, 3, 3, 3])
    assert slope == 0.0


def test_ols_against_normal_equations():
    rng = np.random.default_rng(0)
    x = rng.normal(size=50)
    y = 0.7 * x + rng.normal(size=50)
    A = np.column_stack([x, np.ones_like(x)])
    b, a = np.linalg.solve(A.T @ A, A.T @ y)
    slope, intercept, _ = ols_slope(x, y)
    assert slope == pytest.approx(b, abs=1e-12)
    assert intercept == pytest.approx(a, abs=1e-12)


def test_ols_degenerate():
    with pytest.raises(DomainError):
        ols_slope([1, 1, 1], [1, 2, 3])
    with pytest.raises(DomainError):
        ols_slope([1], [1])
