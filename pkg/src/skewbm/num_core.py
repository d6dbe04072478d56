"""Numerical primitives shared by the rest of the package.

Gaussian special functions, semi-infinite quadrature with an explicit tail
certificate, counter-based random streams and a tiny OLS helper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

SQRT_2PI = math.sqrt(2.0 * math.pi)

TAIL_TOL = 1e-13
QUAD_TOL = 1e-11


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class DivergenceError(DomainError):
    """Raised when an integral is known to diverge."""


class AccuracyError(RuntimeError):
    """Quadrature did not reach the requested accuracy.

    The partial result is attached as ``result``.
    """

    def __init__(self, msg, result):
        super().__init__(msg)
        self.result = result


# ---------------------------------------------------------------------------
# Gaussian functions
# ---------------------------------------------------------------------------

def normal_pdf(x, variance=1.0):
    """Density of N(0, variance) at ``x``."""
    if np.any(np.asarray(variance) <= 0):
        raise DomainError("variance must be positive")
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x / variance) / np.sqrt(2.0 * np.pi * variance)
    return float(out) if out.ndim == 0 else out


def normal_cdf(x):
    out = special.ndtr(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def log_normal_sf(x):
    """log(1 - Phi(x)), finite far into the upper tail."""
    out = special.log_ndtr(-np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error_bound: float
    evaluations: int


def integrate_semi_infinite(f: Callable[[float], float],
                            tail_bound: Callable[[float], float],
                            log_form: bool = False,
                            tail_tol: float = TAIL_TOL,
                            quad_tol: float = QUAD_TOL) -> QuadResult:
    """Integrate ``f`` over [0, inf).

    ``tail_bound(X)`` must return an upper bound of the integral of ``|f|``
    over [X, inf); it is used to pick the truncation point. With
    ``log_form=True``, ``f`` returns the log of a positive integrand.
    """
    x_max = 1.0
    while tail_bound(x_max) > tail_tol:
        x_max *= 1.25
        if x_max > 1e6:
            raise DivergenceError("tail bound never drops below tolerance")
    truncation = tail_bound(x_max)

    g = (lambda x: math.exp(f(x))) if log_form else f

    # split into unit-ish panels so that wide, slowly decaying integrands
    # are not under-resolved by the first Gauss-Kronrod pass
    edges = np.linspace(0.0, x_max, max(2, int(math.ceil(x_max / 4.0)) + 1))
    total = 0.0
    err = 0.0
    evals = 0
    ok = True
    for a, b in zip(edges[:-1], edges[1:]):
        val, e, info = integrate.quad(g, a, b, epsabs=quad_tol / len(edges),
                                      epsrel=1e-13, limit=200, full_output=1)[:3]
        total += val
        err += e
        evals += info["neval"]
        ok = ok and e <= quad_tol
    result = QuadResult(total, err + truncation, evals)
    if not ok or not math.isfinite(total):
        raise AccuracyError("semi-infinite quadrature did not converge", result)
    return result


def gauss_tail_integrand(c: float, weight: float = 1.0):
    """Integrand ``weight * exp(c x^2) * Phi(-x)`` in log form plus its tail bound.

    Needs ``c < 1/2``; the product then decays like ``exp(-(1/2 - c) x^2)``.
    """
    if c >= 0.5:
        raise DivergenceError(f"exp({c} x^2) Phi(-x) is not integrable")
    if weight <= 0:
        raise DomainError("weight must be positive")
    lw = math.log(weight)
    rate = 0.5 - c

    def log_f(x):
        return lw + c * x * x + special.log_ndtr(-x)

    def tail(x):
        # Phi(-x) <= phi(x) / x and int_X^inf exp(-r x^2) <= exp(-r X^2) / (2 r X)
        return weight * math.exp(-rate * x * x) / (SQRT_2PI * x * 2.0 * rate * x)

    return log_f, tail


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

@dataclass
class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Backed by Philox; the key is derived with ``SeedSequence`` so distinct
    stream ids give independent streams and results never depend on which
    worker consumes them.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0 <= self.seed < 2**64 and 0 <= self.stream_id < 2**64):
            raise DomainError("seed and stream_id must be 64-bit unsigned")
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.Philox(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def gaussian(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, size=None):
        return self._gen.random(size)

    def exponential(self, rate: float, size=None):
        if rate <= 0:
            raise DomainError("rate must be positive")
        return self._gen.standard_exponential(size) / rate


def draw_gaussian(stream: RngStream, size=None):
    return stream.gaussian(size)


def draw_exponential(stream: RngStream, rate: float, size=None):
    return stream.exponential(rate, size)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def ols_slope(xs, ys):
    """Least-squares line through ``(xs, ys)``; returns (slope, intercept, r2)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise DomainError("need two equal-length 1-d sequences of size >= 2")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise DomainError("xs are all equal")
    yc = y - y.mean()
    slope = float(xc @ yc) / sxx
    intercept = float(y.mean() - slope * x.mean())
    syy = float(yc @ yc)
    resid = yc - slope * xc
    r2 = 1.0 if syy == 0.0 else 1.0 - float(resid @ resid) / syy
    return slope, intercept, r2
