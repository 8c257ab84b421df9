"""Monte Carlo estimates of homogeneous oriented-percolation constants.

Functional entry points (``estimate_alpha`` and friends) return point
estimates with standard errors; the ``*Estimator`` classes wrap them in the
scikit-learn ``fit``/``predict`` protocol, fitting a table over a grid of
``p`` and predicting by monotone piecewise-linear interpolation.

All grid points share one seed and the same replicate indices, so the
estimates at different ``p`` are computed on coupled edge configurations.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.isotonic import IsotonicRegression
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_int, check_probability, check_probability_array, chunked_map
from .homog import P_C, sample_right_edges, sample_survival
from .lattice import _check_seed

__all__ = [
    "DEFAULT_P_GRID",
    "SpeedTable",
    "ThetaTable",
    "VarianceTable",
    "TailRates",
    "LogLinearFit",
    "FitRejected",
    "InsufficientPoints",
    "NearCriticalWarning",
    "estimate_alpha",
    "estimate_theta",
    "estimate_sigma2",
    "estimate_tail_rates",
    "fit_log_linear_tail",
    "fit_critical_exponent",
    "build_speed_table",
    "build_theta_table",
    "build_variance_table",
    "EdgeSpeedEstimator",
    "SurvivalProbabilityEstimator",
    "EdgeVarianceEstimator",
    "CorrelationLengthEstimator",
    "NU_PARALLEL",
    "NU_PERP",
    "conjectured_height_exponent",
]

DEFAULT_P_GRID = (0.66, 0.68, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 1.0)

#: literature values of the correlation-length exponents
NU_PARALLEL = 1.733847
NU_PERP = 2.193708 / 2


def conjectured_height_exponent(nu_parallel: float = NU_PARALLEL) -> float:
    """Exponent ``nu / (1 + nu)`` at which distance behind the front matches the
    correlation length."""
    return nu_parallel / (1.0 + nu_parallel)


class FitRejected(ValueError):
    """Log-linear tail fit below the acceptance R^2."""


class InsufficientPoints(ValueError):
    pass


class NearCriticalWarning(UserWarning):
    pass


# -- tables -----------------------------------------------------------------------

@dataclass
class _Table:
    p: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    K: np.ndarray
    replicates: np.ndarray
    provenance: dict = field(default_factory=dict)

    quantity = "estimate"

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        order = np.argsort(self.p, kind="stable")
        self.p = self.p[order]
        self.estimate = np.asarray(self.estimate, dtype=float)[order]
        self.stderr = np.asarray(self.stderr, dtype=float)[order]
        self.K = np.asarray(self.K, dtype=np.int64)[order]
        self.replicates = np.asarray(self.replicates, dtype=np.int64)[order]
        if np.any(np.diff(self.p) == 0):
            raise ValueError("duplicate p in table grid")

    def __len__(self):
        return self.p.size

    def rows(self):
        for i in range(len(self)):
            yield (float(self.p[i]), float(self.estimate[i]), float(self.stderr[i]),
                   int(self.K[i]), int(self.replicates[i]))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["p", self.quantity, "stderr", "K", "replicates"])
            for p, est, se, K, R in self.rows():
                w.writerow([repr(p), repr(est), repr(se), K, R])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[0] != "p" or len(header) < 5:
                raise ValueError(f"{path}: not a table CSV (header {header!r})")
            rows = [r for r in reader if r]
        cols = list(zip(*rows)) if rows else [[]] * 5
        return cls(p=[float(v) for v in cols[0]], estimate=[float(v) for v in cols[1]],
                   stderr=[float(v) for v in cols[2]], K=[int(v) for v in cols[3]],
                   replicates=[int(v) for v in cols[4]])

    def to_dict(self):
        return {
            "quantity": self.quantity,
            "rows": [dict(zip(("p", self.quantity, "stderr", "K", "replicates"), r))
                     for r in self.rows()],
            "provenance": self.provenance,
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def monotone_values(self) -> np.ndarray:
        """Isotonic (non-decreasing in ``p``) correction weighted by ``1/stderr^2``."""
        se = np.where(self.stderr > 0, self.stderr, np.nan)
        floor = np.nanmin(se) if np.isfinite(se).any() else 1.0
        w = 1.0 / np.where(np.isfinite(se), se, floor * 1e-3) ** 2
        iso = IsotonicRegression(increasing=True, y_min=0.0, y_max=1.0)
        return iso.fit_transform(self.p, self.estimate, sample_weight=w)

    def interpolate(self, p):
        p = np.asarray(p, dtype=float)
        return np.interp(p, self.p, self._curve())

    def _curve(self):
        return self.estimate


class SpeedTable(_Table):
    """Edge speed ``alpha(p)`` with pinned ``alpha(p_c) = 0`` and ``alpha(1) = 1``.

    Interpolation is piecewise linear on the isotonic-corrected values and is
    clamped outside the grid (so ``p < p_c`` maps to 0).
    """

    quantity = "alpha"

    def pinned(self) -> "SpeedTable":
        keep = (self.p > P_C) & (self.p < 1.0)
        return SpeedTable(
            p=np.r_[P_C, self.p[keep], 1.0],
            estimate=np.r_[0.0, self.estimate[keep], 1.0],
            stderr=np.r_[0.0, self.stderr[keep], 0.0],
            K=np.r_[0, self.K[keep], 0],
            replicates=np.r_[0, self.replicates[keep], 0],
            provenance=dict(self.provenance),
        )

    def covers_critical_to_one(self) -> bool:
        return bool(len(self) and self.p[0] <= P_C and self.p[-1] >= 1.0)

    def _curve(self):
        return self.monotone_values()


class ThetaTable(_Table):
    """Survival probability ``theta(p)``; zero for ``p <= p_c`` and one at ``p = 1``."""

    quantity = "theta"

    def pinned(self) -> "ThetaTable":
        keep = (self.p > P_C) & (self.p < 1.0)
        return ThetaTable(
            p=np.r_[P_C, self.p[keep], 1.0],
            estimate=np.r_[0.0, self.estimate[keep], 1.0],
            stderr=np.r_[0.0, self.stderr[keep], 0.0],
            K=np.r_[0, self.K[keep], 0],
            replicates=np.r_[0, self.replicates[keep], 0],
            provenance=dict(self.provenance),
        )

    def _curve(self):
        return self.monotone_values()

    def interpolate(self, p):
        p = np.asarray(p, dtype=float)
        out = np.interp(p, self.p, self._curve())
        return np.where(p <= P_C, 0.0, out)


class VarianceTable(_Table):
    """Right-edge variance rate ``sigma^2(p)``; clamped to the end points of the grid."""

    quantity = "sigma2"

    def pinned(self) -> "VarianceTable":
        keep = self.p < 1.0
        return VarianceTable(
            p=np.r_[self.p[keep], 1.0],
            estimate=np.r_[self.estimate[keep], 0.0],
            stderr=np.r_[self.stderr[keep], 0.0],
            K=np.r_[self.K[keep], 0],
            replicates=np.r_[self.replicates[keep], 0],
            provenance=dict(self.provenance),
        )


# -- point estimators --------------------------------------------------------------

def _batch_stderr(x, n_batches=20):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float("nan")
    b = min(n_batches, x.size)
    means = np.array([c.mean() for c in np.array_split(x, b)])
    return float(means.std(ddof=1) / math.sqrt(b))


def estimate_alpha(p, K=2000, replicates=200, seed=0, workers=None, offset=0):
    """Edge speed ``r_K / K`` of the half-line seed, averaged over replicates.

    Returns ``(alpha_hat, stderr)``; stderr comes from batch means. ``p = 1``
    returns ``(1.0, 0.0)`` without simulating.
    """
    p = check_probability(p)
    if p == 1.0:
        return 1.0, 0.0
    if p == 0.0:
        raise ValueError("edge speed is undefined at p = 0")
    rk, n_trunc = sample_right_edges(p, K, replicates, seed, workers, offset)
    dead = ~np.isfinite(rk)
    if dead.mean() > 0.01:
        warnings.warn(f"{dead.sum()} of {rk.size} half-line runs died before K={K} at p={p}",
                      NearCriticalWarning, stacklevel=2)
    if n_trunc:
        warnings.warn(f"{n_trunc} runs came within reach of the seed cut-off at p={p}",
                      NearCriticalWarning, stacklevel=2)
    speeds = rk[~dead] / K
    if speeds.size == 0:
        return float("nan"), float("nan")
    return float(speeds.mean()), _batch_stderr(speeds)


def estimate_theta(p, K=500, replicates=2000, seed=0, workers=None, offset=0):
    """Fraction of origin clusters alive at height ``K``; binomial stderr."""
    p = check_probability(p)
    if p == 1.0:
        return 1.0, 0.0
    batch = sample_survival(p, K, replicates, seed, workers, offset)
    theta = float(batch.censored.mean())
    return theta, math.sqrt(max(theta * (1 - theta), 0.0) / batch.censored.size)


def theta_censoring_check(p, K=500, replicates=2000, seed=0, workers=None):
    """``theta`` at ``K`` and ``2K`` on the same replicates; the gap bounds the
    censoring bias."""
    a = estimate_theta(p, K, replicates, seed, workers)
    b = estimate_theta(p, 2 * K, replicates, seed, workers)
    return {"K": K, "theta_K": a[0], "theta_2K": b[0], "stderr": a[1], "gap": a[0] - b[0]}


def _jackknife_var_stderr(x):
    n = x.size
    s1, s2 = x.sum(), (x * x).sum()
    loo = (s2 - x * x - (s1 - x) ** 2 / (n - 1)) / (n - 2)
    return math.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum())


def estimate_sigma2(p, K=1000, replicates=400, seed=0, workers=None, offset=0):
    """``Var(r_K) / K`` across replicates of the half-line seed; jackknife stderr."""
    p = check_probability(p)
    if p == 1.0:
        return 0.0, 0.0
    if p < P_C + 0.05:
        warnings.warn(f"sigma^2 converges slowly near p_c (p={p})", NearCriticalWarning,
                      stacklevel=2)
    rk, _ = sample_right_edges(p, K, replicates, seed, workers, offset)
    rk = rk[np.isfinite(rk)]
    if rk.size < 3:
        raise InsufficientPoints("fewer than 3 surviving half-line runs")
    return float(rk.var(ddof=1) / K), _jackknife_var_stderr(rk) / K


# -- tail fits -----------------------------------------------------------------------

@dataclass(frozen=True)
class LogLinearFit:
    slope: float
    intercept: float
    r2: float
    window: tuple
    n_points: int

    @property
    def rate(self) -> float:
        return -self.slope


def fit_log_linear_tail(k, prob, counts=None, min_points=8, min_count=20):
    """Fit ``log(prob) ~ a + b k`` on the contiguous window with the best R^2.

    Points with ``prob <= 0`` or fewer than ``min_count`` supporting events are
    dropped first; among windows of at least ``min_points`` points the largest
    R^2 wins, ties going to the longer window.
    """
    k = np.asarray(k, dtype=float)
    prob = np.asarray(prob, dtype=float)
    ok = prob > 0
    if counts is not None:
        ok &= np.asarray(counts) >= min_count
    # only the leading run of usable points is contiguous in k
    bad = np.flatnonzero(~ok)
    stop = bad[0] if bad.size else ok.size
    x, y = k[:stop], np.log(prob[:stop])
    n = x.size
    if n < min_points:
        raise InsufficientPoints(f"{n} usable tail points, need {min_points}")
    cx = np.r_[0, np.cumsum(x)]
    cy = np.r_[0, np.cumsum(y)]
    cxx = np.r_[0, np.cumsum(x * x)]
    cyy = np.r_[0, np.cumsum(y * y)]
    cxy = np.r_[0, np.cumsum(x * y)]
    best = (-np.inf, 0, 0)
    for i in range(n - min_points + 1):
        j = np.arange(i + min_points, n + 1)
        m = j - i
        sx, sy = cx[j] - cx[i], cy[j] - cy[i]
        sxx = cxx[j] - cxx[i] - sx * sx / m
        syy = cyy[j] - cyy[i] - sy * sy / m
        sxy = cxy[j] - cxy[i] - sx * sy / m
        with np.errstate(invalid="ignore", divide="ignore"):
            # flat or rising stretches carry no decay information
            r2 = np.where((syy > 0) & (sxy < 0), sxy * sxy / (sxx * syy), 0.0)
        r2 = np.round(r2, 12)
        idx = np.flatnonzero(r2 == r2.max())[-1]
        if r2[idx] > best[0] or (r2[idx] == best[0] and m[idx] > best[2] - best[1]):
            best = (r2[idx], i, j[idx])
    r2, i, j = best
    xs, ys = x[i:j], y[i:j]
    slope, intercept = np.polyfit(xs, ys, 1)
    return LogLinearFit(float(slope), float(intercept), float(r2),
                        (float(xs[0]), float(xs[-1])), int(j - i))


def _survival_curve(values, n_max):
    values = np.asarray(values)
    ks = np.arange(1, n_max + 1)
    counts = np.array([(values >= k).sum() for k in ks])
    return ks, counts


@dataclass(frozen=True)
class TailRates:
    p: float
    gamma_par: float
    gamma_perp: float
    fit_par: LogLinearFit
    fit_perp: LogLinearFit
    K: int
    replicates: int
    branch: str = "subcritical"

    @property
    def L_par(self) -> float:
        return 1.0 / self.gamma_par

    @property
    def L_perp(self) -> float:
        return 1.0 / self.gamma_perp

    def to_dict(self):
        return {
            "p": self.p, "gamma_par": self.gamma_par, "gamma_perp": self.gamma_perp,
            "L_par": self.L_par, "L_perp": self.L_perp,
            "r2_par": self.fit_par.r2, "r2_perp": self.fit_perp.r2,
            "window_par": list(self.fit_par.window), "window_perp": list(self.fit_perp.window),
            "K": self.K, "replicates": self.replicates, "branch": self.branch,
        }


def estimate_tail_rates(p, K=1000, replicates=100_000, seed=0, workers=None,
                        supercritical=False, min_r2=0.9, min_count=20):
    """Decay rates of ``P(tau >= n)`` (time) and ``P(R0 >= n)`` (space).

    For ``p > p_c`` set ``supercritical=True``: the time rate then comes from
    ``P(n <= tau < K)`` among finite clusters and the space rate from
    ``P(tau^{-n..n} < K)``, the extinction probability of an interval seed.
    Both are rare-event estimates; inadequate sampling surfaces as
    :class:`InsufficientPoints` or :class:`FitRejected`.
    """
    p = check_probability(p)
    check_int(K, "K", minimum=8)
    if p >= P_C and not supercritical:
        raise ValueError("p >= p_c needs supercritical=True (finite-cluster conditioning)")
    batch = sample_survival(p, K, replicates, seed, workers)
    if not supercritical:
        ks, counts = _survival_curve(batch.tau, K)
        fit_par = fit_log_linear_tail(ks, counts / replicates, counts, min_count=min_count)
        reach = np.maximum(batch.reach, 0)
        ks, counts = _survival_curve(reach, int(reach.max()) if reach.size else 1)
        fit_perp = fit_log_linear_tail(ks, counts / replicates, counts, min_count=min_count)
        branch = "subcritical"
    else:
        finite = batch.tau[~batch.censored]
        ks, counts = _survival_curve(finite, K - 1)
        fit_par = fit_log_linear_tail(ks, counts / replicates, counts, min_count=min_count)
        fit_perp = _interval_extinction_fit(p, K, replicates, seed, workers, min_count)
        branch = "supercritical"
    for name, fit in (("time", fit_par), ("space", fit_perp)):
        if fit.r2 < min_r2:
            raise FitRejected(f"{name} tail fit at p={p} has R^2={fit.r2:.3f} < {min_r2}")
    return TailRates(p, fit_par.rate, fit_perp.rate, fit_par, fit_perp, K, replicates, branch)


def _interval_extinction_fit(p, K, replicates, seed, workers, min_count):
    probs = np.full(K, p)
    useed = np.uint64(_check_seed(seed))
    ns, dead = [], []
    for n in range(1, 64):
        lo = -(n - n % 2)

        def run(chunk, lo=lo):
            counts, _, _ = _kernels.grow_profile_batch(useed, chunk, 0, lo, -lo, probs)
            return counts[:, K] == 0

        died = np.concatenate(chunked_map(run, np.arange(replicates, dtype=np.int64), workers))
        ns.append(n)
        dead.append(int(died.sum()))
        if dead[-1] < min_count:
            break
    dead = np.asarray(dead)
    return fit_log_linear_tail(ns, dead / replicates, dead, min_count=min_count)


def fit_critical_exponent(p_values, lengths, p_c=P_C):
    """Slope of ``log L`` against ``-log|p - p_c|``; returns ``(nu_hat, stderr)``."""
    p_values = np.asarray(p_values, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    ok = np.isfinite(lengths) & (lengths > 0) & (p_values != p_c)
    if ok.sum() < 4:
        raise InsufficientPoints(f"need at least 4 accepted points, got {int(ok.sum())}")
    x = -np.log(np.abs(p_values[ok] - p_c))
    y = np.log(lengths[ok])
    coef, cov = np.polyfit(x, y, 1, cov="unscaled")
    resid = y - np.polyval(coef, x)
    dof = x.size - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    return float(coef[0]), float(math.sqrt(max(cov[0, 0] * s2, 0.0)))


# -- tables over grids -----------------------------------------------------------

def _provenance(kind, grid, K, replicates, seed, **extra):
    out = {"kind": kind, "grid": [float(p) for p in grid], "K": int(K),
           "replicates": int(replicates), "seed": int(seed)}
    out.update(extra)
    return out


def build_speed_table(p_grid=DEFAULT_P_GRID, K=2000, replicates=200, seed=0, workers=None):
    grid = check_probability_array(p_grid)
    est, se = zip(*(estimate_alpha(p, K, replicates, seed, workers) if p > P_C or p == 1
                    else (0.0, 0.0) for p in grid))
    zero = [0 if p == 1 or p <= P_C else 1 for p in grid]
    return SpeedTable(grid, est, se, [K * z for z in zero], [replicates * z for z in zero],
                      provenance=_provenance("alpha", grid, K, replicates, seed))


def build_theta_table(p_grid=DEFAULT_P_GRID, K=500, replicates=2000, seed=0, workers=None):
    grid = check_probability_array(p_grid)
    est, se = zip(*(estimate_theta(p, K, replicates, seed, workers) if p > P_C
                    else (0.0, 0.0) for p in grid))
    sim = [0 if p == 1 or p <= P_C else 1 for p in grid]
    return ThetaTable(grid, est, se, [K * z for z in sim], [replicates * z for z in sim],
                      provenance=_provenance("theta", grid, K, replicates, seed))


def build_variance_table(p_grid=DEFAULT_P_GRID, K=1000, replicates=400, seed=0, workers=None):
    grid = check_probability_array(p_grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearCriticalWarning)
        est, se = zip(*(estimate_sigma2(p, K, replicates, seed, workers) for p in grid))
    sim = [0 if p == 1 else 1 for p in grid]
    return VarianceTable(grid, est, se, [K * z for z in sim], [replicates * z for z in sim],
                         provenance=_provenance("sigma2", grid, K, replicates, seed))


# -- scikit-learn style wrappers ---------------------------------------------------

class _TableEstimator(BaseEstimator):
    _builder = None

    def fit(self, X=None, y=None):
        """Estimate the table on the grid ``X`` (default grid when omitted)."""
        grid = DEFAULT_P_GRID if X is None else check_probability_array(X)
        table = type(self)._builder(grid, K=self.K, replicates=self.replicates, seed=self.seed,
                                    workers=self.workers)
        self.raw_table_ = table
        self.table_ = table.pinned()
        return self

    def predict(self, X):
        check_is_fitted(self, "table_")
        return self.table_.interpolate(check_probability_array(X))


class EdgeSpeedEstimator(_TableEstimator):
    """``alpha(p)`` over a grid; ``predict`` interpolates the pinned isotonic table."""

    _builder = staticmethod(build_speed_table)

    def __init__(self, K=2000, replicates=200, seed=0, workers=None):
        self.K = K
        self.replicates = replicates
        self.seed = seed
        self.workers = workers


class SurvivalProbabilityEstimator(_TableEstimator):
    _builder = staticmethod(build_theta_table)

    def __init__(self, K=500, replicates=2000, seed=0, workers=None):
        self.K = K
        self.replicates = replicates
        self.seed = seed
        self.workers = workers


class EdgeVarianceEstimator(_TableEstimator):
    _builder = staticmethod(build_variance_table)

    def __init__(self, K=1000, replicates=400, seed=0, workers=None):
        self.K = K
        self.replicates = replicates
        self.seed = seed
        self.workers = workers


class CorrelationLengthEstimator(BaseEstimator):
    """Tail rates over a subcritical grid, plus the exponent fits when the grid
    has at least four accepted points.

    Attributes
    ----------
    rates_ : list of TailRates
        Accepted fits, in grid order.
    rejected_ : dict
        ``p -> reason`` for grid points whose fit was rejected.
    nu_par_, nu_perp_ : tuple or None
        ``(nu_hat, stderr)`` from :func:`fit_critical_exponent`.
    """

    def __init__(self, K=1000, replicates=100_000, seed=0, workers=None, supercritical=False):
        self.K = K
        self.replicates = replicates
        self.seed = seed
        self.workers = workers
        self.supercritical = supercritical

    def fit(self, X, y=None):
        grid = check_probability_array(X)
        self.rates_, self.rejected_ = [], {}
        for p in grid:
            try:
                self.rates_.append(estimate_tail_rates(
                    float(p), self.K, self.replicates, self.seed, self.workers,
                    supercritical=self.supercritical))
            except (FitRejected, InsufficientPoints) as exc:
                self.rejected_[float(p)] = str(exc)
        ps = [r.p for r in self.rates_]
        self.nu_par_ = self.nu_perp_ = None
        try:
            self.nu_par_ = fit_critical_exponent(ps, [r.L_par for r in self.rates_])
            self.nu_perp_ = fit_critical_exponent(ps, [r.L_perp for r in self.rates_])
        except InsufficientPoints as exc:
            self.rejected_["exponent"] = str(exc)
        return self

    def predict(self, X):
        """Time correlation length ``L_par`` interpolated in ``p``."""
        check_is_fitted(self, "rates_")
        ps = np.array([r.p for r in self.rates_])
        return np.interp(check_probability_array(X), ps, [r.L_par for r in self.rates_])
