"""Kolmogorov-Smirnov tests, Monte Carlo studies and the test of theta = 0.

Every replication draws from its own stream ``RngStream(seed, stream_id)``
with the id built from (study tag, n, replication index), and results are
collected in index order, so a study is reproducible bit for bit whatever
the number of worker processes.
"""

from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import limit_dist
from .likelihood import alpha_n, log_likelihood_derivatives, mle, UndefinedEstimator
from .num_core import DomainError, RngStream, integrate_semi_infinite, normal_cdf, ols_slope
from .sbm_sim import GridPath, SbmParams, local_time_proxy, simulate_path

KS_TERMS = 100

# stream namespaces
TAG_PATH = 1
TAG_CALIBRATION = 2
TAG_UPSILON = 3


def stream_id(tag: int, n: int, rep: int) -> int:
    if not (0 <= tag < 256 and 0 <= n < 2**32 and 0 <= rep < 2**24):
        raise DomainError("stream coordinates out of range")
    return (tag << 56) | (n << 24) | rep


def default_workers() -> int:
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KsResult:
    d: float
    p_value: float
    n_eff: float


def kolmogorov_sf(lam: float, terms: int = KS_TERMS) -> float:
    """P(K > lam) for the limiting Kolmogorov distribution."""
    if lam <= 0.0:
        return 1.0
    if lam < 0.3:
        # the alternating series converges too slowly here; use the Jacobi
        # theta form of the CDF instead
        j = np.arange(1, terms + 1)
        cdf = math.sqrt(2.0 * math.pi) / lam * np.sum(
            np.exp(-((2 * j - 1) ** 2) * math.pi ** 2 / (8.0 * lam * lam)))
        return float(min(1.0, max(0.0, 1.0 - cdf)))
    j = np.arange(1, terms + 1)
    p = 2.0 * np.sum((-1.0) ** (j - 1) * np.exp(-2.0 * j * j * lam * lam))
    return float(min(1.0, max(0.0, p)))


def ks_one_sample(samples, cdf) -> KsResult:
    """One-sample KS test of ``samples`` against a vectorised ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise DomainError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return KsResult(d, kolmogorov_sf(math.sqrt(n) * d), float(n))


def ks_two_sample(a, b) -> KsResult:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise DomainError("empty sample")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    n_eff = a.size * b.size / (a.size + b.size)
    return KsResult(d, kolmogorov_sf(math.sqrt(n_eff) * d), n_eff)


# ---------------------------------------------------------------------------
# Replication machinery
# ---------------------------------------------------------------------------

def _one_replication(task):
    kind, seed, tag, theta, n, rep = task
    path = simulate_path(SbmParams(theta=theta, x0=0.0, T=1.0, n=n),
                         RngStream(seed, stream_id(tag, n, rep)))
    if kind == "alpha":
        try:
            return (alpha_n(log_likelihood_derivatives(path, 2)),)
        except UndefinedEstimator:
            return (math.nan,)
    if kind == "mle":
        r = mle(path)
        return (r.theta_mle, r.alpha_scaled, r.alpha_n, float(r.boundary))
    if kind == "jacod":
        return (jacod_sum(path), local_time_proxy(path))
    raise DomainError(kind)


def run_replications(kind, seed, n, reps, theta=0.0, tag=TAG_PATH, workers=None):
    """Array of per-replication records, ordered by replication index."""
    tasks = [(kind, seed, tag, theta, n, rep) for rep in range(reps)]
    workers = workers or default_workers()
    if workers <= 1 or reps < 2:
        rows = [_one_replication(t) for t in tasks]
    else:
        chunk = max(1, reps // (8 * workers))
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_one_replication, tasks, chunksize=chunk))
    return np.array(rows, dtype=float)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


@dataclass
class ExperimentResult:
    name: str
    config: dict
    columns: list
    rows: list
    records: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps({"study": self.name, **self.config}, sort_keys=True) + "\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(row[c]) for c in self.columns) + "\n")
        return buf.getvalue()

    def records_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps({"study": self.name, **self.config}, sort_keys=True) + "\n")
        names = list(self.records)
        buf.write(",".join(names) + "\n")
        for vals in zip(*(self.records[k] for k in names)):
            buf.write(",".join(_fmt(v) for v in vals) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, (np.floating, float)):
                v = float(v)
                return v if math.isfinite(v) else None
            if isinstance(v, (np.integer,)):
                return int(v)
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v
        return json.dumps(clean({"study": self.name, "config": self.config,
                                 "summary": self.summary, "rows": self.rows}),
                          sort_keys=True, indent=2)


def _config(**kw):
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in kw.items()}


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

def table1_study(n_list, reps, seed, workers=None) -> ExperimentResult:
    """Distance between the MLE and alpha_n / n^(1/4) under theta = 0.

    Reports with theta_n on the boundary are left out of the statistics and
    counted in ``boundary_count``.
    """
    if reps < 2:
        raise DomainError("reps must be >= 2")
    rows = []
    rec = {"n": [], "rep": [], "theta_mle": [], "alpha_scaled": [], "boundary": []}
    for n in n_list:
        data = run_replications("mle", seed, n, reps, workers=workers)
        th, al, _, bd = data.T
        bd = bd.astype(bool)
        diff = np.abs(th - al)[~bd]
        m = float(diff.mean()) if diff.size else math.nan
        rows.append({"n": n, "mean": m, "mean_n12": m * n ** 0.5, "mean_n34": m * n ** 0.75,
                     "std": float(diff.std(ddof=1)) if diff.size > 1 else math.nan,
                     "q90": float(np.quantile(diff, 0.9)) if diff.size else math.nan,
                     "boundary_count": int(bd.sum())})
        rec["n"] += [n] * reps
        rec["rep"] += list(range(reps))
        rec["theta_mle"] += list(th)
        rec["alpha_scaled"] += list(al)
        rec["boundary"] += list(bd)
    return ExperimentResult(
        "table1", _config(n_list=list(n_list), reps=reps, seed=seed, theta=0.0, x0=0.0, T=1.0),
        ["n", "mean", "mean_n12", "mean_n34", "std", "q90", "boundary_count"], rows, rec)


def upsilon_pool(size: int, seed: int) -> np.ndarray:
    values, _ = limit_dist.draw_upsilon_many(RngStream(seed, stream_id(TAG_UPSILON, 0, 0)), size)
    return values


def table2_study(n_list, reps, upsilon_pool_size, seed, workers=None) -> ExperimentResult:
    """KS distance of alpha_n to the variance-matched Upsilon and normal laws."""
    if reps < 100:
        raise DomainError("reps must be >= 100")
    pool = upsilon_pool(upsilon_pool_size, seed)
    var_u = float(np.var(pool, ddof=1))
    rows = []
    rec = {"n": [], "rep": [], "alpha_n": []}
    for n in n_list:
        a = run_replications("alpha", seed, n, reps, workers=workers)[:, 0]
        a = a[np.isfinite(a)]
        var_a = float(np.var(a, ddof=1))
        ks_u = ks_two_sample(a, pool * math.sqrt(var_a / var_u))
        sd = math.sqrt(var_a)
        ks_g = ks_one_sample(a, lambda x: normal_cdf(x / sd))
        rows.append({"n": n, "reps": a.size, "var_alpha": var_a, "var_upsilon": var_u,
                     "d_upsilon": ks_u.d, "p_upsilon": ks_u.p_value,
                     "d_normal": ks_g.d, "p_normal": ks_g.p_value,
                     "inside_fraction": float(np.mean(np.abs(a) / n ** 0.25 < 1.0))})
        rec["n"] += [n] * a.size
        rec["rep"] += list(range(a.size))
        rec["alpha_n"] += list(a)
    return ExperimentResult(
        "table2", _config(n_list=list(n_list), reps=reps, upsilon_pool_size=upsilon_pool_size,
                          seed=seed, theta=0.0, x0=0.0, T=1.0),
        ["n", "reps", "var_alpha", "var_upsilon", "d_upsilon", "p_upsilon", "d_normal",
         "p_normal", "inside_fraction"], rows, rec)


def log_log_slope(ns, values):
    """OLS slope of log(values) against log(ns)."""
    return ols_slope(np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(values, dtype=float)))


def rate_regression(n_list, reps, seed, workers=None) -> ExperimentResult:
    """Slope of log sd(theta_n) against log n, all MLE values included."""
    if len(n_list) < 3:
        raise DomainError("need at least three values of n")
    sds = []
    for n in n_list:
        th = run_replications("mle", seed, n, reps, workers=workers)[:, 0]
        sds.append(float(np.std(th, ddof=1)))
    slope, intercept, r2 = log_log_slope(n_list, sds)
    rows = [{"log_n": math.log(n), "log_std": math.log(s)} for n, s in zip(n_list, sds)]
    return ExperimentResult(
        "rate", _config(n_list=list(n_list), reps=reps, seed=seed, theta=0.0, x0=0.0, T=1.0),
        ["log_n", "log_std"], rows,
        summary={"delta": slope, "intercept": intercept, "r2": r2, "std": sds})


def variance_scaling(n_list, reps, seed, workers=None) -> ExperimentResult:
    """Slope of log Var(alpha_n) against log n."""
    if len(n_list) < 3:
        raise DomainError("need at least three values of n")
    vs = []
    for n in n_list:
        a = run_replications("alpha", seed, n, reps, workers=workers)[:, 0]
        vs.append(float(np.var(a[np.isfinite(a)], ddof=1)))
    slope, intercept, r2 = log_log_slope(n_list, vs)
    rows = [{"log_n": math.log(n), "log_var": math.log(v)} for n, v in zip(n_list, vs)]
    return ExperimentResult(
        "var-scaling", _config(n_list=list(n_list), reps=reps, seed=seed, theta=0.0, x0=0.0, T=1.0),
        ["log_n", "log_var"], rows,
        summary={"beta": slope, "intercept": intercept, "r2": r2, "var": vs})


# ---------------------------------------------------------------------------
# Hypothesis test
# ---------------------------------------------------------------------------

def statistic_of(report, n):
    """n^(1/4) theta_n, or alpha_n when the MLE sits on the boundary."""
    if report.boundary and math.isfinite(report.alpha_n):
        return report.alpha_n, True
    return n ** 0.25 * report.theta_mle, report.boundary


@dataclass
class Calibration:
    """Null distribution of the test statistic at one sample size."""

    n: int
    null_stats: np.ndarray
    var_alpha: float
    var_upsilon: float

    def threshold(self, level: float, mode: str = "mc") -> float:
        if not 0.0 < level < 1.0:
            raise DomainError("level must lie in (0, 1)")
        if mode == "mc":
            return float(np.quantile(self.null_stats, 1.0 - level / 2.0))
        if mode == "asymptotic":
            scale = math.sqrt(self.var_alpha / self.var_upsilon)
            return limit_dist.upsilon_quantile(1.0 - level / 2.0) * scale
        raise DomainError(f"unknown calibration mode {mode!r}")


def calibrate(n, reps, seed, pool_size=10_000, workers=None) -> Calibration:
    """Simulate the statistic under theta = 0 on a dedicated stream namespace."""
    data = run_replications("mle", seed, n, reps, tag=TAG_CALIBRATION, workers=workers)
    th, _, a, bd = data.T
    stat = np.where((bd > 0) & np.isfinite(a), a, n ** 0.25 * th)
    var_a = float(np.var(a[np.isfinite(a)], ddof=1))
    var_u = float(np.var(upsilon_pool(pool_size, seed), ddof=1))
    return Calibration(n, np.sort(stat), var_a, var_u)


@dataclass(frozen=True)
class HypothesisOutcome:
    reject: bool
    statistic: float
    threshold: float
    boundary: bool


def hypothesis_test(path: GridPath, level: float, calibration: Calibration,
                    mode: str = "mc") -> HypothesisOutcome:
    """Two-sided test of theta = 0: reject when |statistic| exceeds the threshold."""
    if calibration.n != path.n:
        raise DomainError("calibration was built for a different n")
    report = mle(path)
    stat, flag = statistic_of(report, path.n)
    thr = calibration.threshold(level, mode)
    return HypothesisOutcome(bool(abs(stat) > thr), float(stat), thr, flag)


def rejection_study(n, trials, level, seed, theta_list=(0.0, 0.5), calib_reps=20_000,
               mode="mc", workers=None) -> ExperimentResult:
    """Rejection rates of the calibrated test on simulated paths."""
    cal = calibrate(n, calib_reps, seed, workers=workers)
    thr = cal.threshold(level, mode)
    rows = []
    rec = {"theta": [], "rep": [], "statistic": [], "reject": []}
    for theta in theta_list:
        data = run_replications("mle", seed, n, trials, theta=theta, workers=workers)
        th, _, a, bd = data.T
        stat = np.where((bd > 0) & np.isfinite(a), a, n ** 0.25 * th)
        rej = np.abs(stat) > thr
        rate = float(rej.mean())
        rows.append({"theta": theta, "trials": trials, "threshold": thr, "rejection_rate": rate,
                     "se": math.sqrt(rate * (1 - rate) / trials)})
        rec["theta"] += [theta] * trials
        rec["rep"] += list(range(trials))
        rec["statistic"] += list(stat)
        rec["reject"] += list(rej)
    return ExperimentResult(
        "test", _config(n=n, trials=trials, level=level, seed=seed, calib_reps=calib_reps,
                        mode=mode, theta_list=list(theta_list), x0=0.0, T=1.0),
        ["theta", "trials", "threshold", "rejection_rate", "se"], rows, rec)


def power_histogram(theta, n, reps, bins, seed, lim=2.0, workers=None) -> ExperimentResult:
    """Binned density of alpha_n / n^(1/4) under theta and under theta = 0."""
    edges = np.linspace(-lim, lim, bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    out = {}
    for label, th in (("theta", theta), ("null", 0.0)):
        a = run_replications("alpha", seed, n, reps, theta=th, workers=workers)[:, 0]
        a = a[np.isfinite(a)] / n ** 0.25
        dens, _ = np.histogram(a, bins=edges)
        out[label] = (a, dens / (a.size * (edges[1] - edges[0])))
    a = out["theta"][0]
    grid = np.linspace(-lim, lim, 4001)
    kde = sps.gaussian_kde(a[np.abs(a) < 2 * lim])
    mode = float(grid[np.argmax(kde(grid))])
    rows = [{"center": c, "density": d, "density_null": d0}
            for c, d, d0 in zip(centers, out["theta"][1], out["null"][1])]
    return ExperimentResult(
        "power", _config(theta=theta, n=n, reps=reps, bins=bins, seed=seed, x0=0.0, T=1.0),
        ["center", "density"], rows,
        records={"alpha_scaled": list(a)},
        summary={"mode": mode, "skewness": float(sps.skew(a)),
                 "null_skewness": float(sps.skew(out["null"][0]))})


# ---------------------------------------------------------------------------
# Occupation-sum check
# ---------------------------------------------------------------------------

def jacod_sum(path: GridPath) -> float:
    """n^(-1/2) sum_i h(sqrt(n) X_i) with h(x) = exp(-x^2)."""
    n = path.n
    x = math.sqrt(n / path.T) * path.values[:-1]
    return float(np.exp(-x * x).sum() / math.sqrt(n))


def jacod_constant_gaussian() -> float:
    """c(h) for h(x, y) = exp(-x^2): the y-integral is 1, the x-integral by quadrature."""
    res = integrate_semi_infinite(lambda x: math.exp(-x * x),
                                  lambda x: math.exp(-x * x) / (2.0 * x))
    return 2.0 * res.value


def jacod_check(n, reps, seed, workers=None) -> dict:
    data = run_replications("jacod", seed, n, reps, workers=workers)
    s, lt = data.T
    slope, intercept, r2 = ols_slope(lt, s)
    return {"slope": slope, "intercept": intercept, "corr": float(np.corrcoef(lt, s)[0, 1]),
            "c_h": jacod_constant_gaussian(), "sums": s, "local_time": lt}
