"""Limit constants mu_k and the limit law Upsilon = W(l_1) / l_1.

``l_1`` is the local time at 0 of a standard Brownian motion at time 1; it
has the half-normal law of sup_{[0,1]} B. Given ``l_1 = y``, Upsilon is
N(0, 1/y), so Upsilon is a Gaussian scale mixture with heavy x^-3 tails
(its variance is infinite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .num_core import (DomainError, RngStream, gauss_tail_integrand,
                       integrate_semi_infinite)

_SQRT_2_PI = math.sqrt(2.0 / math.pi)


# ---------------------------------------------------------------------------
# mu_k
# ---------------------------------------------------------------------------

def _jacod_even_constant(k: int):
    """c(h_k) for even k as (value, err): 2 int [1 + e^{c x^2} / (2k-1)] Phi(-x)."""
    base = integrate_semi_infinite(*gauss_tail_integrand(0.0), log_form=True)
    c = 2.0 * k * (k - 1) / (2 * k - 1) ** 2
    extra = integrate_semi_infinite(*gauss_tail_integrand(c, 1.0 / (2 * k - 1)),
                                    log_form=True)
    return 2.0 * (base.value + extra.value), 2.0 * (base.abs_error_bound + extra.abs_error_bound)


@lru_cache(maxsize=None)
def mu_constant(k: int):
    """mu_k and a bound on its quadrature error.

    Even k: mu_k = -c(h_k) < 0. Odd k: mu_k = c(h_{2k}) > 0, which is the
    same integral with 4k-1 in place of 2k-1.
    """
    if int(k) != k or k < 1:
        raise DomainError("k must be a positive integer")
    k = int(k)
    if k % 2 == 0:
        value, err = _jacod_even_constant(k)
        return -value, err
    return _jacod_even_constant(2 * k)


@dataclass(frozen=True)
class MuTable:
    K: int
    mu: np.ndarray
    err: np.ndarray

    def __getitem__(self, k):
        return float(self.mu[k - 1])

    def to_csv(self) -> str:
        lines = ["k,mu,err"]
        for k in range(1, self.K + 1):
            lines.append(f"{k},{self.mu[k - 1]:.17g},{self.err[k - 1]:.17g}")
        return "\n".join(lines) + "\n"


def mu_table(K: int = 6) -> MuTable:
    vals = [mu_constant(k) for k in range(1, K + 1)]
    return MuTable(K, np.array([v for v, _ in vals]), np.array([e for _, e in vals]))


def jacod_constant_mc(h, n_samples: int, stream: RngStream, chunk: int = 1_000_000):
    """Monte Carlo estimate of c(h) = iint h(x, y) p(1, y) dx dy.

    y is drawn from N(0, 1) and x from a unit Laplace law, so each draw
    contributes h(x, y) / g(x). Returns (estimate, standard error).
    """
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        y = stream.gaussian(m)
        x = stream.exponential(1.0, m) * np.where(stream.uniform(m) < 0.5, -1.0, 1.0)
        w = h(x, y) * 2.0 * np.exp(np.abs(x))
        total += float(w.sum())
        total_sq += float((w * w).sum())
        done += m
    mean = total / n_samples
    var = (total_sq / n_samples - mean * mean) * n_samples / (n_samples - 1)
    return mean, math.sqrt(var / n_samples)


def mu_monte_carlo(k: int, n_samples: int, stream: RngStream):
    """Independent Monte Carlo counterpart of :func:`mu_constant`."""

    def hk(power):
        def h(x, y):
            s = x + y
            return (np.sign(s) * np.exp(-2.0 * np.maximum(x * s, 0.0))) ** power
        return h

    if k % 2 == 0:
        est, se = jacod_constant_mc(hk(k), n_samples, stream)
        return -est, se
    return jacod_constant_mc(hk(2 * k), n_samples, stream)


# ---------------------------------------------------------------------------
# Upsilon
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UpsilonSample:
    value: float
    h: float


def _draw_local_time(stream: RngStream, size):
    # maximum of a Brownian path on [0, 1] given its endpoint U
    u = stream.gaussian(size)
    v = stream.exponential(0.5, size)
    return 0.5 * (u + np.sqrt(v + u * u))


def draw_upsilon(stream: RngStream) -> UpsilonSample:
    h = float(_draw_local_time(stream, None))
    z = float(stream.gaussian())
    return UpsilonSample(value=z / math.sqrt(h), h=h)


def draw_upsilon_many(stream: RngStream, size: int):
    """Vectorised sampler; returns (values, h)."""
    h = _draw_local_time(stream, size)
    z = stream.gaussian(size)
    return z / np.sqrt(h), h


def local_time_density(y):
    """Half-normal density of l_1."""
    y = np.asarray(y, dtype=float)
    return np.where(y > 0, _SQRT_2_PI * np.exp(-0.5 * y * y), 0.0)


def upsilon_density(x: float) -> float:
    """f(x) = int_0^inf sqrt(y / 2pi) exp(-x^2 y / 2) f_l(y) dy by quadrature.

    The integrand peaks near y = 1/x^2, so y = v / (1 + x^2/2) keeps the
    mass at v of order one for every x.
    """
    a = 0.5 * float(x) * float(x)
    scale = 1.0 / (1.0 + a)

    def f(v):
        y = v * scale
        return scale * math.sqrt(y) * math.exp(-a * y - 0.5 * y * y) / math.pi

    def tail(v):
        # for y >= Y: sqrt(y) e^{-ay - y^2/2} <= (1 + y) e^{-b y}, b = a + Y/2
        Y = v * scale
        b = a + 0.5 * Y
        return math.exp(-b * Y) * ((1.0 + Y) / b + 1.0 / (b * b)) / math.pi

    return integrate_semi_infinite(f, tail).value


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(160)


_CDF_CHUNK = 20_000


def _upsilon_sf_positive(ax):
    xs = ax[:, None]
    # Phi(-t) < 1e-20 beyond t = 9.3; the density of s is negligible beyond s = 4
    b = np.minimum(9.5, 4.0 * xs)
    t = 0.5 * b * (_GL_NODES[None, :] + 1.0)
    s = t / xs
    w_s = 2.0 * _SQRT_2_PI * s * np.exp(-0.5 * s ** 4)
    return (0.5 * b[:, 0]) * np.sum(_GL_WEIGHTS * special.ndtr(-t) * w_s, axis=1) / ax


def upsilon_cdf(x):
    """P(Upsilon <= x), vectorised.

    Uses F(x) = 1 - E[Phi(-x sqrt(l_1))] for x >= 0; with t = x s and
    s = sqrt(l_1) the integrand is smooth on a finite range, so a fixed
    Gauss-Legendre rule is accurate to rounding.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x).reshape(-1)
    sf = np.full_like(ax, 0.5)
    idx = np.flatnonzero(ax > 0)
    # bounded memory: the rule needs a (points x nodes) work array
    for start in range(0, idx.size, _CDF_CHUNK):
        sel = idx[start:start + _CDF_CHUNK]
        sf[sel] = _upsilon_sf_positive(ax[sel])
    out = np.where(x.reshape(-1) >= 0, 1.0 - sf, sf).reshape(x.shape)
    return float(out) if out.ndim == 0 else out


def upsilon_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie in (0, 1)")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -upsilon_quantile(1.0 - p)
    hi = 1.0
    while upsilon_cdf(hi) < p:
        hi *= 2.0
    return optimize.brentq(lambda x: upsilon_cdf(x) - p, 0.0, hi, xtol=1e-12, rtol=1e-14)
