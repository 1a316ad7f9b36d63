"""Monte Carlo checks of the sample mean, autocovariance and higher-moment
central limit theorems."""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .exceptions import MomentUnavailable, NotSummable, TooFewValues, ValidationError

__all__ = [
    "normality_tests", "sample_mean_stat", "sample_autocov_stat", "pth_moment_stat",
    "sample_autocovariance", "StatResult", "ExperimentReport", "median_p_values",
    "build_report", "long_run_or_none",
]

LEVEL = 0.01


def normality_tests(values):
    """Kolmogorov-Smirnov test against N(0, 1) and the Jarque-Bera test.

    Returns
    -------
    dict
        ``ks_stat, ks_p, jb_stat, jb_p``.

    Raises
    ------
    TooFewValues
        With fewer than 100 values.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 100:
        raise TooFewValues(f"need at least 100 values, got {x.size}")
    ks = stats.kstest(x, "norm")
    if np.ptp(x) == 0:
        jb_stat, jb_p = math.inf, 0.0
    else:
        jb = stats.jarque_bera(x)
        jb_stat, jb_p = float(jb.statistic), float(jb.pvalue)
    return {"ks_stat": float(ks.statistic), "ks_p": float(ks.pvalue),
            "jb_stat": jb_stat, "jb_p": jb_p}


@dataclass
class StatResult:
    """Standardized statistics across replications.

    Attributes
    ----------
    raw : ndarray
        Unstandardized normalized sums, shape ``(reps,)`` or ``(reps, L)``.
    standardized : ndarray
        Values that are N(0, 1) (marginally) under the CLT.
    scale : float or ndarray
        Standard deviation (or Cholesky factor) used.
    variance_source : {"analytic", "empirical"}
    estimates : ndarray, optional
        Per-replication sample autocovariances for autocovariance statistics.
    marginal : ndarray, optional
        Each component divided by its own cross-replication standard
        deviation (vector statistics only).
    """

    raw: np.ndarray
    standardized: np.ndarray
    scale: object
    variance_source: str
    estimates: np.ndarray = None
    marginal: np.ndarray = None


def _values(samples):
    out = []
    for s in samples:
        v = s.values if hasattr(s, "values") else s
        out.append(np.asarray(v, dtype=float))
    if not out:
        raise ValidationError("no samples")
    return out


def _normalized_sums(arrays, transform, target):
    return np.array([float(np.sum(transform(a) - target)) / math.sqrt(a.size) for a in arrays])


def _standardize(raw, variance):
    if variance is not None:
        if not variance > 0:
            raise ValidationError("variance must be positive")
        sd = math.sqrt(variance)
        return raw / sd, sd, "analytic"
    if raw.size < 2:
        raise TooFewValues("empirical standardization needs at least two replications")
    sd = float(np.std(raw, ddof=1))
    return raw / sd, sd, "empirical"


def sample_mean_stat(samples, mean=0.0, variance=None):
    """``|E_n|^{-1/2} sum_{u in E_n} (X_u - mean)`` per replication.

    Parameters
    ----------
    samples : list of LatticeSample or arrays
    mean : float
        ``E[X_0]``; use the analytic mean for non-centred models.
    variance : float, optional
        Long-run variance; without it the cross-replication variance is used.
    """
    arrays = _values(samples)
    raw = _normalized_sums(arrays, _identity, mean)
    z, sd, src = _standardize(raw, variance)
    return StatResult(raw, z, sd, src)


def _identity(a):
    return a ** 1


def pth_moment_stat(samples, p, moment, variance=None):
    """``|E_n|^{-1/2} sum (X_u^p - E[X_0^p])`` per replication.

    ``p = 1`` evaluates the same expression as :func:`sample_mean_stat`.
    """
    if int(p) != p or p < 1:
        raise ValidationError("p must be a positive integer")
    arrays = _values(samples)
    fn = _identity if p == 1 else (lambda a: a ** int(p))
    raw = _normalized_sums(arrays, fn, moment)
    z, sd, src = _standardize(raw, variance)
    return StatResult(raw, z, sd, src)


def _lag_slices(shape, lag):
    a, b = [], []
    for n, k in zip(shape, lag):
        k = int(k)
        if abs(k) >= n:
            raise ValidationError("lag exceeds the window")
        if k >= 0:
            a.append(slice(0, n - k))
            b.append(slice(k, n))
        else:
            a.append(slice(-k, n))
            b.append(slice(0, n + k))
    return tuple(a), tuple(b)


def _as_lags(lags, m):
    out = []
    for k in lags:
        k = np.atleast_1d(np.asarray(k, dtype=int))
        if k.size == 1 and m > 1:
            k = np.concatenate([k, np.zeros(m - 1, dtype=int)])
        if k.size != m:
            raise ValidationError(f"lag {k.tolist()} does not match dimension {m}")
        out.append(k)
    return out


def sample_autocovariance(values, lag, mean=None):
    """Sample autocovariance over the pairs ``u, u + lag`` inside the window.

    The centring uses ``mean`` when given, else the window average.
    """
    a = np.asarray(values, dtype=float)
    x = a - (a.mean() if mean is None else mean)
    sa, sb = _lag_slices(a.shape, lag)
    return float(np.mean(x[sa] * x[sb]))


def sample_autocov_stat(samples, lags, R, mean=0.0, quad=None, delta=None):
    """Normalized autocovariance sums per lag, jointly standardized.

    For each lag ``k`` and replication,
    ``|E_{n-k}|^{-1/2} sum (X~_u X~_{u+k} - R(k))`` with ``X~ = X - mean``.
    The vector over lags is whitened by the Cholesky factor of its
    cross-replication covariance; ``marginal`` holds the per-lag
    standardization.  Whitened components can degenerate when sums at
    different lags are almost exactly linearly related.

    Parameters
    ----------
    R : sequence of float
        Analytic autocovariances at ``lags``.
    quad : CharacteristicQuadruplet, optional
        When given, ``4 + delta`` moments are checked first.
    """
    if quad is not None:
        from .levy import check_moment_condition
        if not check_moment_condition(quad, 4.0 + (delta or 0.0)):
            raise MomentUnavailable("the basis lacks 4 + delta moments")
    arrays = _values(samples)
    m = arrays[0].ndim
    ks = _as_lags(lags, m)
    R = np.asarray(R, dtype=float)
    if R.size != len(ks):
        raise ValidationError("one R(k) per lag is required")
    raw = np.empty((len(arrays), len(ks)))
    est = np.empty_like(raw)
    for i, a in enumerate(arrays):
        x = a - mean
        for j, k in enumerate(ks):
            sa, sb = _lag_slices(a.shape, k)
            prod = x[sa] * x[sb]
            raw[i, j] = float(np.sum(prod - R[j])) / math.sqrt(prod.size)
            est[i, j] = float(np.mean(prod))
    if len(arrays) < len(ks) + 1:
        raise TooFewValues("need more replications than lags")
    C = np.atleast_2d(np.cov(raw, rowvar=False))
    L = np.linalg.cholesky(C)
    z = np.linalg.solve(L, raw.T).T
    marginal = raw / np.sqrt(np.diag(C))
    return StatResult(raw, z, L, "empirical", est, marginal)


def median_p_values(runs):
    """Median KS and JB p-values over runs of :func:`normality_tests`."""
    return {"ks_p": float(np.median([r["ks_p"] for r in runs])),
            "jb_p": float(np.median([r["jb_p"] for r in runs]))}


@dataclass
class ExperimentReport:
    """Replicated CLT experiment with tests, targets and verdicts.

    Every criterion records its tolerance; the standardized values are kept
    for re-testing.
    """

    model_hash: str
    windows: list
    reps: int
    statistic: str
    standardized: np.ndarray
    tests: dict
    targets: dict
    criteria: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add_criterion(self, name, passed, tolerance, value=None):
        self.criteria.append({"name": name, "passed": bool(passed), "tolerance": tolerance,
                              "value": value})

    @property
    def passed(self):
        return all(c["passed"] for c in self.criteria)

    def to_dict(self):
        return {"model_hash": self.model_hash, "windows": self.windows, "reps": self.reps,
                "statistic": self.statistic, "tests": self.tests,
                "targets": self.targets, "criteria": self.criteria, "meta": self.meta,
                "standardized_summary": {
                    "mean": float(np.mean(self.standardized)),
                    "std": float(np.std(self.standardized, ddof=1)),
                    "count": int(np.size(self.standardized))}}

    def to_json(self, path=None):
        text = json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def standardized_csv(self, path=None, header_lines=()):
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        z = np.atleast_2d(np.asarray(self.standardized, dtype=float).T).T
        w.writerow(["rep"] + [f"z{j}" for j in range(z.shape[1])])
        for i, row in enumerate(z):
            w.writerow([i] + [repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def build_report(statistic, result, model_hash, windows, targets, verdict=None,
                 level=LEVEL, meta=None):
    """Run the normality tests on ``result`` and assemble a report.

    Vector statistics are tested component by component on their marginal
    standardization.
    """
    z = np.asarray(result.standardized)
    tested = z if result.marginal is None else np.asarray(result.marginal)
    cols = tested.reshape(tested.shape[0], -1)
    tests = [normality_tests(cols[:, j]) for j in range(cols.shape[1])]
    rep = ExperimentReport(model_hash, windows, int(z.shape[0]), statistic, z,
                           tests[0] if len(tests) == 1 else {"per_component": tests},
                           dict(targets, variance_source=result.variance_source),
                           meta=dict(meta or {}))
    if result.marginal is not None:
        rep.meta["tested_values"] = "marginal"
    if verdict is not None:
        rep.targets["clt_verdict"] = verdict.to_dict()
    for j, t in enumerate(tests):
        sfx = "" if len(tests) == 1 else f"[{j}]"
        rep.add_criterion(f"ks{sfx}", t["ks_p"] > level, f"p > {level}", t["ks_p"])
        rep.add_criterion(f"jb{sfx}", t["jb_p"] > level, f"p > {level}", t["jb_p"])
    return rep


def long_run_or_none(fn):
    """Call ``fn`` and return ``None`` when the covariances are not summable."""
    try:
        return fn()
    except NotSummable:
        return None
