"""Right-edge fluctuations of the Poisson cluster.

``W(u) = (r_t(ceil(N u)) - drift(N u)) / sqrt(N)`` with
``drift(s) = int_0^s alpha(rho(y, t)) dy`` (the envelope ``Gamma_t(s)``),
compared against the predicted variance
``V(u) = (1/N) int_0^{N u} sigma^2(rho(y, t)) dy``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from statsmodels.stats.diagnostic import normal_ad

from . import _kernels
from ._validation import check_int
from .estimators import VarianceTable, fit_log_linear_tail
from .lattice import stream_key
from .poisson import (PoissonParams, critical_height, default_cutoff, level_probs,
                      sample_poisson_profiles)
from .shape import ShapeCurve, envelope, integrate_profile

__all__ = [
    "EdgeFunctional",
    "GaussianityReport",
    "IndependenceReport",
    "BreakPointTrace",
    "HeightFluctuationFit",
    "InsufficientSurvivors",
    "RangeWarning",
    "DEFAULT_U_GRID",
    "predicted_variance",
    "sample_W",
    "test_gaussianity",
    "test_increment_independence",
    "detect_break_points",
    "break_points_homogeneous",
    "fit_power_law",
    "fit_height_exponent",
    "sample_cluster_heights",
]

DEFAULT_U_GRID = (0.1, 0.25, 0.5, 0.75, 0.9)


class InsufficientSurvivors(RuntimeError):
    pass


class RangeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EdgeFunctional:
    u_grid: np.ndarray
    W: np.ndarray  # (replicates, len(u_grid))
    V: np.ndarray
    replicate_ids: np.ndarray
    attempted: int
    discarded: int
    N: float
    variance_clamped: bool = False

    @property
    def discard_fraction(self) -> float:
        return self.discarded / self.attempted if self.attempted else 0.0

    @property
    def lattice_step(self) -> float:
        """Spacing of attainable ``W`` values (right edges share the parity of the height)."""
        return 2.0 / math.sqrt(self.N)

    def column(self, u) -> np.ndarray:
        idx = np.flatnonzero(np.isclose(self.u_grid, u))
        if not idx.size:
            raise KeyError(f"u={u} not on the grid {self.u_grid}")
        return self.W[:, idx[0]]

    def variance_ratio(self, u) -> float:
        idx = np.flatnonzero(np.isclose(self.u_grid, u))[0]
        return float(self.W[:, idx].var(ddof=1) / self.V[idx])


def predicted_variance(params: PoissonParams, u_grid, variances: VarianceTable, h=1e-3):
    """``V(u)`` for each ``u`` and whether ``sigma^2`` had to be clamped at the
    near-critical end of its table."""
    u = np.asarray(u_grid, dtype=float)
    N = params.N
    scale = params.t ** (1.0 / params.beta)
    y_end = N * u.max() / scale
    y, I = integrate_profile(variances.interpolate, params.beta, h, y_end)
    V = scale * np.interp(N * u / scale, y, I) / N
    p_top = 1 - math.exp(-(y_end ** -params.beta))
    return V, bool(p_top < variances.p.min())


def sample_W(params: PoissonParams, u_grid, curve: ShapeCurve, variances: VarianceTable,
             replicates=200, seed=0, workers=None, max_attempts=None, min_usable=50,
             h=1e-3) -> EdgeFunctional:
    """Collect ``W(u)`` from the first ``replicates`` clusters (by replicate
    index) that survive past ``max(u) N``; dead clusters are discarded and
    counted.

    Raises
    ------
    InsufficientSurvivors
        If fewer than ``min_usable`` survivors turn up within ``max_attempts``.
    """
    u = np.asarray(u_grid, dtype=float)
    if u.ndim != 1 or u.size == 0 or np.any((u <= 0) | (u >= 1)) or np.any(np.diff(u) <= 0):
        raise ValueError("u_grid must be increasing inside (0, 1)")
    check_int(replicates, "replicates", minimum=1)
    max_attempts = 10 * replicates if max_attempts is None else max_attempts
    N = params.N
    ks = np.ceil(N * u).astype(int)
    top = int(ks.max())
    drift = np.asarray(envelope(curve, params.t, N * u), dtype=float)

    rows, ids = [], []
    attempted = 0
    while len(rows) < replicates and attempted < max_attempts:
        batch = np.arange(attempted, min(attempted + replicates, max_attempts))
        counts, _, right = sample_poisson_profiles(params, batch, seed, n_levels=top,
                                                   workers=workers)
        alive = counts[:, top] > 0
        for b, ok in enumerate(alive):
            if ok and len(rows) < replicates:
                rows.append((right[b, ks] - drift) / math.sqrt(N))
                ids.append(batch[b])
        attempted = int(batch[-1]) + 1 if len(rows) < replicates else int(ids[-1]) + 1
    if len(rows) < min_usable:
        raise InsufficientSurvivors(f"{len(rows)} surviving clusters out of {attempted}")
    V, clamped = predicted_variance(params, u, variances, h)
    return EdgeFunctional(u_grid=u, W=np.array(rows), V=V, replicate_ids=np.array(ids),
                          attempted=attempted, discarded=attempted - len(rows), N=N,
                          variance_clamped=clamped)


@dataclass(frozen=True)
class GaussianityReport:
    n: int
    statistic: float
    pvalue: float
    skewness: float
    excess_kurtosis: float

    def rejected(self, level=0.01) -> bool:
        return self.pvalue < level


def test_gaussianity(samples, lattice_step=None, seed=0) -> GaussianityReport:
    """Anderson-Darling test against the normal law with fitted mean and variance.

    Parameters
    ----------
    samples : array_like
        At least 100 values.
    lattice_step : float, optional
        Spacing of lattice-valued samples (``EdgeFunctional.lattice_step``).
        Ties make the EDF test reject lattice data whatever its shape, so the
        samples are first spread by a uniform jitter of one step width drawn
        from ``seed``. Moments are computed on the raw samples.
    """
    raw = np.asarray(samples, dtype=float)
    if raw.size < 100:
        raise ValueError(f"need at least 100 samples, got {raw.size}")
    x = raw
    if lattice_step:
        rng = np.random.default_rng(seed)
        x = raw + rng.uniform(-0.5, 0.5, raw.size) * float(lattice_step)
    stat, pval = normal_ad(x)
    return GaussianityReport(n=int(x.size), statistic=float(stat), pvalue=float(pval),
                             skewness=float(stats.skew(raw)),
                             excess_kurtosis=float(stats.kurtosis(raw)))


test_gaussianity.__test__ = False


@dataclass(frozen=True)
class IndependenceReport:
    corr: np.ndarray
    pvalues: np.ndarray
    flagged: list = field(default_factory=list)
    level: float = 0.01

    @property
    def any_flagged(self) -> bool:
        return bool(self.flagged)


def test_increment_independence(W, level=0.01) -> IndependenceReport:
    """Pairwise correlations of the increments ``W(u_i) - W(u_{i-1})`` (with
    ``W(0) = 0``), flagged by a Fisher-z test at family-wise ``level``
    (Bonferroni over pairs)."""
    W = np.asarray(W, dtype=float)
    n, m = W.shape
    if n < 100 or m < 3:
        raise ValueError("need at least 100 samples on at least 3 grid points")
    inc = np.diff(np.hstack([np.zeros((n, 1)), W]), axis=1)
    corr = np.corrcoef(inc, rowvar=False)
    z = np.arctanh(np.clip(corr, -0.999999, 0.999999)) * math.sqrt(n - 3)
    pvals = 2 * stats.norm.sf(np.abs(z))
    np.fill_diagonal(pvals, 1.0)
    pairs = [(a, b) for a in range(m) for b in range(a + 1, m)]
    flagged = [(a, b) for a, b in pairs if pvals[a, b] < level / len(pairs)]
    return IndependenceReport(corr=corr, pvalues=pvals, flagged=flagged, level=level)


test_increment_independence.__test__ = False


@dataclass(frozen=True)
class BreakPointTrace:
    heights: np.ndarray
    positions: np.ndarray
    look: int

    def increments(self) -> tuple[np.ndarray, np.ndarray]:
        """``(r(T_{i+1}) - r(T_i), T_{i+1} - T_i)``."""
        return np.diff(self.positions), np.diff(self.heights)

    def to_rows(self):
        for T, r in zip(self.heights, self.positions):
            yield int(T), int(r)


def detect_break_points(params: PoissonParams, seed=0, replicate=0, look=None,
                        top=None) -> BreakPointTrace:
    """Heights where the cluster's rightmost site has a forward cluster living
    ``look`` levels (default ``ceil(log(N)**2)``), read off the same edge
    variates as the cluster itself. Heights are scanned up to ``top``
    (default ``0.9 N``)."""
    N = params.N
    look = default_cutoff(N) if look is None else check_int(look, "look", minimum=1)
    top = int(math.floor(0.9 * N)) if top is None else int(top)
    probs = level_probs(params, top + look)
    return _scan(stream_key(seed, replicate), 0, probs, top, look)


def break_points_homogeneous(p, K, seed=0, replicate=0, look=None) -> BreakPointTrace:
    """Break points of the half-line-seeded homogeneous process up to height ``K``."""
    look = default_cutoff(K) if look is None else check_int(look, "look", minimum=1)
    probs = np.full(K + look, float(p))
    return _scan(stream_key(seed, replicate), 2 * (K + look), probs, K, look)


def _scan(key, width, probs, top, look):
    _, counts, _, right, _, _, _ = _kernels.grow(key, 0, -width, 0, probs[:top], False, 0)
    T = _kernels.break_point_scan(key, right, counts, 0, top, probs, look)
    return BreakPointTrace(heights=T, positions=right[T], look=look)


# -- height fluctuations -----------------------------------------------------------

@dataclass(frozen=True)
class HeightFluctuationFit:
    t: np.ndarray
    N: np.ndarray
    sd: np.ndarray
    b_hat: float
    stderr: float
    replicates: int
    censored: int = 0

    def ci(self, z=1.96):
        return self.b_hat - z * self.stderr, self.b_hat + z * self.stderr

    def to_dict(self):
        lo, hi = self.ci()
        return {"t": self.t.tolist(), "N": self.N.tolist(), "sd": self.sd.tolist(),
                "b_hat": self.b_hat, "stderr": self.stderr, "ci95": [lo, hi],
                "replicates": self.replicates, "censored": self.censored}


def fit_power_law(N, sd):
    """Slope and stderr of ``log sd`` regressed on ``log N``."""
    x, y = np.log(np.asarray(N, float)), np.log(np.asarray(sd, float))
    if x.size < 2:
        raise ValueError("need at least two scales")
    if x.size == 2:
        return float((y[1] - y[0]) / (x[1] - x[0])), float("nan")
    coef, cov = np.polyfit(x, y, 1, cov="unscaled")
    resid = y - np.polyval(coef, x)
    s2 = float(resid @ resid) / (x.size - 2)
    return float(coef[0]), math.sqrt(max(cov[0, 0] * s2, 0.0))


def sample_cluster_heights(params: PoissonParams, replicates, seed=0, workers=None,
                           cap_factor=4.0):
    """Top occupied height of each replicate cluster and a censoring mask.

    Unless ``params`` fixes a cap, clusters are grown to ``cap_factor * N``:
    at small ``N`` the default ``2N`` cap truncates a visible share of heights.
    """
    if params.max_height_cap is None:
        params = PoissonParams(params.beta, params.t,
                               max(params.cap, int(math.ceil(cap_factor * params.N))))
    ids = np.arange(replicates)
    counts, _, _ = sample_poisson_profiles(params, ids, seed, workers=workers)
    alive = counts > 0
    return alive.sum(axis=1) - 1, alive[:, -1]


def fit_height_exponent(beta, t_list, replicates=200, seed=0, workers=None, samples=None):
    """Regress the spread of cluster heights on ``N`` across ``t_list``.

    ``samples`` (one array of heights per ``t``) bypasses the simulation.
    """
    t = np.asarray(t_list, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two values of t")
    N = np.array([critical_height(beta, ti) for ti in t])
    if N.max() / N.min() < 4:
        warnings.warn(f"N spans only a factor {N.max() / N.min():.2f}", RangeWarning,
                      stacklevel=2)
    censored = 0
    if samples is None:
        samples = []
        for ti in t:
            h, cens = sample_cluster_heights(PoissonParams(beta, float(ti)), replicates, seed,
                                             workers)
            samples.append(h)
            censored += int(cens.sum())
    sd = np.array([np.std(s, ddof=1) for s in samples])
    b, se = fit_power_law(N, sd)
    return HeightFluctuationFit(t=t, N=N, sd=sd, b_hat=b, stderr=se,
                                replicates=int(min(len(s) for s in samples)), censored=censored)


def increment_tail_fit(traces, min_points=8, min_count=20):
    """Log-linear fit of ``P(T_{i+1} - T_i > k)`` pooled over traces."""
    gaps = np.concatenate([np.diff(tr.heights) for tr in traces])
    ks = np.arange(1, int(gaps.max()) + 1) if gaps.size else np.arange(1, 2)
    counts = np.array([(gaps > k).sum() for k in ks])
    return fit_log_linear_tail(ks, counts / max(gaps.size, 1), counts, min_points, min_count)


