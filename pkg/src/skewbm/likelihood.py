"""Likelihood of the skewness parameter for a discretely observed path.

Everything is expressed through the per-step ratios

    r_i = sgn(X_{i+1}) * exp(-2 (X_i X_{i+1})^+ / delta),

for which q_theta / q_0 = 1 + theta * r_i. The log-likelihood ratio is
sum(log1p(theta r_i)) and its scaled derivatives are

    L^(k)(theta) = (-1)^(k-1) * sum((r_i / (1 + theta r_i))^k).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .num_core import DomainError, normal_pdf
from .sbm_sim import GridPath

DEFAULT_K = 6
MAX_ITER = 200
SCORE_TOL = 1e-10


class UndefinedEstimator(DomainError):
    """The second derivative vanishes, so alpha_n and d_n are undefined."""


def transition_density(theta, delta, x, y):
    """q_theta(delta, x, y) = p(delta, y - x) + sgn(y) theta p(delta, |x| + |y|)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = normal_pdf(y - x, delta) + np.sign(y) * theta * normal_pdf(np.abs(x) + np.abs(y), delta)
    return float(out) if np.ndim(out) == 0 else out


def h_k(k, x, y, T=1.0):
    """[sgn(x+y) exp(-(2/T) (x (x+y))^+)]^k."""
    if k < 1:
        raise DomainError("k must be >= 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = x + y
    out = (np.sign(s) * np.exp(-(2.0 / T) * np.maximum(x * s, 0.0))) ** k
    return float(out) if out.ndim == 0 else out


def step_ratios(path: GridPath) -> np.ndarray:
    """r_i for i = 0..n-1; exponents that underflow give exact zeros."""
    x = path.values
    prod = x[:-1] * x[1:]
    return np.sign(x[1:]) * np.exp(-2.0 * np.maximum(prod, 0.0) / path.delta)


@dataclass
class DerivativeStack:
    """L_n^(k)(0) for k = 1..K, indexed as ``stack[k]``."""

    n: int
    T: float
    L: np.ndarray

    @property
    def K(self) -> int:
        return len(self.L)

    def __getitem__(self, k: int) -> float:
        if not 1 <= k <= self.K:
            raise IndexError(f"derivative order {k} outside 1..{self.K}")
        return float(self.L[k - 1])


def log_likelihood_derivatives(path: GridPath, K: int = DEFAULT_K,
                               route: str = "ratio") -> DerivativeStack:
    """Scaled derivatives of the log-likelihood at theta = 0.

    ``route`` selects how each summand is evaluated: ``"ratio"`` from the
    step ratios, ``"hk"`` via h_k(sqrt(n) X_i, sqrt(n) (X_{i+1} - X_i)), or
    ``"density"`` as the ratio p(delta, |x|+|y|) / q_0(delta, x, y) of
    Gaussian densities taken in log space. They agree up to rounding.
    """
    if K < 2:
        raise DomainError("K must be at least 2")
    n = path.n
    x = path.values
    if route == "ratio":
        r = step_ratios(path)
    elif route == "hk":
        rn = math.sqrt(n)
        r = h_k(1, rn * x[:-1], rn * np.diff(x), path.T)
    elif route == "density":
        a, b = x[:-1], x[1:]
        d = path.delta
        log_num = -0.5 * (np.abs(a) + np.abs(b)) ** 2 / d
        log_den = -0.5 * (b - a) ** 2 / d
        r = np.sign(b) * np.exp(log_num - log_den)
    else:
        raise DomainError(f"unknown route {route!r}")
    r = r[r != 0.0]
    L = np.empty(K)
    p = np.ones_like(r)
    for k in range(1, K + 1):
        p = p * r
        L[k - 1] = (-1) ** (k - 1) * p.sum()
    return DerivativeStack(n=n, T=path.T, L=L)


def log_likelihood_ratio(path: GridPath, theta: float) -> float:
    """log Z_n(theta); -inf when a factor vanishes (theta = +-1 with a crossing)."""
    if not abs(theta) <= 1.0:
        raise DomainError("theta must lie in [-1, 1]")
    f = 1.0 + theta * step_ratios(path)
    if np.any(f <= 0.0):
        return -math.inf
    return float(np.log1p(theta * step_ratios(path)).sum())


def likelihood_ratio(path: GridPath, theta: float) -> float:
    """Z_n(theta) = prod_i (1 + theta r_i), accumulated in log space."""
    return math.exp(log_likelihood_ratio(path, theta))


def score_derivative(r: np.ndarray, theta: float, k: int = 1) -> float:
    """L^(k)(theta) from precomputed step ratios."""
    t = r / (1.0 + theta * r)
    return float((-1) ** (k - 1) * np.sum(t ** k))


def alpha_n(stack: DerivativeStack) -> float:
    """-n^(1/4) L^(1)(0) / L^(2)(0)."""
    if stack[2] == 0.0:
        raise UndefinedEstimator("L^(2)(0) = 0: no step carries information on theta")
    return -stack.n ** 0.25 * stack[1] / stack[2]


def expansion_coefficients(stack: DerivativeStack, p: int) -> np.ndarray:
    """d^(1), ..., d^(p+1) of the asymptotic expansion of the MLE.

    d^(m+1) = -sum_k L^(k+1)/L^(2) * C_k(m+1), where C_k(s) sums the
    products d^(i_1)...d^(i_k) over compositions of s into k parts taken
    from 1..m. C is tabulated by dynamic programming over (parts, sum).
    """
    if p < 0:
        raise DomainError("p must be >= 0")
    if stack.K < p + 2:
        raise DomainError(f"need K >= {p + 2} derivatives, have {stack.K}")
    if stack[2] == 0.0:
        raise UndefinedEstimator("L^(2)(0) = 0")
    d = np.zeros(p + 2)
    d[1] = 1.0
    for m in range(1, p + 1):
        s = m + 1
        # comp[k][t]: compositions of t into k parts in 1..m
        comp = np.zeros((s + 1, s + 1))
        comp[1, 1:m + 1] = d[1:m + 1]
        for k in range(2, s + 1):
            for t in range(k, s + 1):
                comp[k, t] = sum(d[j] * comp[k - 1, t - j] for j in range(1, min(m, t - 1) + 1))
        d[s] = -sum(stack[k + 1] / stack[2] * comp[k, s] for k in range(2, s + 1))
    return d[1:]


def theta_expansion(stack: DerivativeStack, p: int) -> float:
    """Sum_{m=1}^{p+1} d^(m) alpha_n^m n^(-m/4)."""
    d = expansion_coefficients(stack, p)
    a = alpha_n(stack) / stack.n ** 0.25
    return float(sum(dm * a ** m for m, dm in enumerate(d, start=1)))


@dataclass
class EstimateReport:
    theta_mle: float
    alpha_scaled: float
    alpha_n: float
    expansion: list = field(default_factory=list)
    theta_expansion: float = math.nan
    crossed: bool = False
    boundary: bool = False
    solver_iters: int = 0
    score_residual: float = 0.0

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v
        out = {}
        for k, v in asdict(self).items():
            out[k] = [clean(float(e)) for e in v] if isinstance(v, list) else clean(v)
        return out

    def to_json(self) -> str:
        # field order is the dataclass order, which is the documented one
        return json.dumps(self.to_dict(), indent=2)


def _solve_score(r: np.ndarray, start: float, tol: float):
    """Root of the strictly decreasing score on (-1, 1) by safeguarded Newton."""
    lo, hi = -1.0, 1.0
    theta = start
    s = score_derivative(r, theta)
    it = 0
    while it < MAX_ITER:
        it += 1
        if abs(s) <= tol:
            break
        if s > 0:
            lo = theta
        else:
            hi = theta
        ds = score_derivative(r, theta, 2)
        step = theta - s / ds if ds < 0 else math.nan
        theta_new = step if lo < step < hi else 0.5 * (lo + hi)
        if theta_new == theta or hi - lo <= 4 * np.finfo(float).eps:
            break
        theta = theta_new
        s = score_derivative(r, theta)
    return theta, s, it


def mle(path: GridPath, p: int = 1, K: int = DEFAULT_K) -> EstimateReport:
    """Maximum likelihood estimate of theta with the alpha_n diagnostics.

    Paths whose score keeps one sign on (-1, 1) (for instance paths that
    never go below zero) get the maximising endpoint and ``boundary=True``.
    """
    stack = log_likelihood_derivatives(path, max(K, p + 2))
    n = path.n
    try:
        a = alpha_n(stack)
        d = expansion_coefficients(stack, p)
        a_scaled = a / n ** 0.25
        big_theta = float(sum(dm * a_scaled ** m for m, dm in enumerate(d, start=1)))
        expansion = [float(v) for v in d[1:]]
    except UndefinedEstimator:
        a = a_scaled = big_theta = math.nan
        expansion = []

    r = step_ratios(path)
    r = r[r != 0.0]
    report = dict(alpha_scaled=a_scaled, alpha_n=a, expansion=expansion,
                  theta_expansion=big_theta, crossed=path.crossed)
    if r.size == 0 or np.all(r >= 0.0):
        return EstimateReport(theta_mle=1.0, boundary=True, **report)
    if np.all(r <= 0.0):
        return EstimateReport(theta_mle=-1.0, boundary=True, **report)

    # limits of the score at the endpoints; a ratio of -1 (+1) sends it to -inf (+inf)
    if not np.any(r == -1.0) and score_derivative(r, 1.0) >= 0.0:
        return EstimateReport(theta_mle=1.0, boundary=True, **report)
    if not np.any(r == 1.0) and score_derivative(r, -1.0) <= 0.0:
        return EstimateReport(theta_mle=-1.0, boundary=True, **report)

    start = min(max(a_scaled, -0.99), 0.99) if math.isfinite(a_scaled) else 0.0
    theta, s, it = _solve_score(r, start, SCORE_TOL * n)
    return EstimateReport(theta_mle=theta, solver_iters=it, score_residual=s, **report)


def contrast_log(path: GridPath, theta: float) -> float:
    """log Z_n(theta / n^(1/4))."""
    u = theta / path.n ** 0.25
    if not abs(u) < 1.0:
        raise DomainError("theta / n^(1/4) must lie in (-1, 1)")
    return log_likelihood_ratio(path, u)
