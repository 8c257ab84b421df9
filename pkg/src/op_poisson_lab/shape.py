"""Limit shape of the Poisson cluster and envelope checks against simulations.

In scaled coordinates edges at height ``y`` are open with probability
``f(y) = 1 - exp(-y**-beta)``; the right boundary ``g`` solves ``g(0) = 0``,
``g'(y) = alpha(f(y))`` up to ``y_c`` (where ``f(y_c) = p_c``) and stays flat
above it. The unscaled envelope is ``Gamma_t(k) = t**(1/beta) g(k / t**(1/beta))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive
from .cluster import Cluster
from .estimators import SpeedTable
from .homog import P_C
from .poisson import critical_height

__all__ = [
    "ShapeCurve",
    "EnvelopeReport",
    "f_scaled",
    "scaled_critical_height",
    "refined_grid",
    "integrate_profile",
    "build_shape",
    "envelope",
    "check_envelope",
    "LimitShape",
]

REFINE_LEVELS = 6


def f_scaled(y, beta):
    """``1 - exp(-y**-beta)``: edge probability at scaled height ``y > 0``."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("f_scaled is defined for y > 0 only")
    out = -np.expm1(-(y ** (-float(beta))))
    return float(out) if out.ndim == 0 else out


def _f_closed(y, beta):
    # f with its limit f(0) = 1 filled in, for quadrature grids starting at 0
    y = np.asarray(y, dtype=float)
    out = np.ones_like(y)
    pos = y > 0
    out[pos] = -np.expm1(-(y[pos] ** (-float(beta))))
    return out


def scaled_critical_height(beta) -> float:
    """``y_c = (-log(1 - p_c))**(-1/beta)``."""
    return (-math.log1p(-P_C)) ** (-1.0 / float(beta))


def refined_grid(y_end, h, levels=REFINE_LEVELS):
    """Uniform step ``h`` on ``[0, y_end]`` with geometric refinement next to ``y_end``.

    The last ``8h`` are split into zones whose length and step halve in turn
    (8 steps per zone) until the step reaches ``h / 2**levels``.
    """
    if y_end <= 0:
        return np.array([0.0])
    fine = h / 2**levels
    tail = 8 * h
    if y_end <= tail:
        n = max(1, int(math.ceil(y_end / fine)))
        return np.linspace(0.0, y_end, n + 1)
    n0 = int(math.ceil((y_end - tail) / h))
    pieces = [np.linspace(0.0, y_end - tail, n0 + 1)]
    start = y_end - tail
    for j in range(1, levels + 1):
        length = tail / 2**j
        pieces.append(start + np.linspace(0.0, length, 9)[1:])
        start += length
    pieces.append(start + np.linspace(0.0, y_end - start, 9)[1:])
    grid = np.concatenate(pieces)
    grid[-1] = y_end
    return grid


def integrate_profile(func_of_p, beta, h, y_end=None):
    """Cumulative trapezoid of ``func_of_p(f(y))`` on :func:`refined_grid`.

    Returns ``(y_grid, integral)`` with ``integral[0] = 0``; ``y_end``
    defaults to ``y_c``.
    """
    y_end = scaled_critical_height(beta) if y_end is None else float(y_end)
    y = refined_grid(y_end, h)
    vals = np.asarray(func_of_p(_f_closed(y, beta)), dtype=float)
    return y, cumulative_trapezoid(vals, y, initial=0.0)


@dataclass(frozen=True)
class ShapeCurve:
    beta: float
    y_grid: np.ndarray
    g_values: np.ndarray
    y_c: float
    alpha_source: dict

    def g(self, y):
        """``g`` at scaled heights, flat at ``g(y_c)`` beyond ``y_c``."""
        y = np.asarray(y, dtype=float)
        out = np.interp(y, self.y_grid, self.g_values)
        return float(out) if out.ndim == 0 else out

    @property
    def g_max(self) -> float:
        return float(self.g_values[-1])

    def envelope(self, t, k):
        return envelope(self, t, k)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("y,g\n")
            for y, g in zip(self.y_grid, self.g_values):
                fh.write(f"{y!r},{g!r}\n")


def build_shape(beta, speeds: SpeedTable, h=1e-3, y_max=None) -> ShapeCurve:
    """Integrate ``g' = alpha(f(y))`` with the table's monotone interpolant.

    Parameters
    ----------
    beta : float
        Decay exponent of the edge rates.
    speeds : SpeedTable
        Must span ``[p_c, 1]``; use ``table.pinned()`` on a raw estimate.
    h : float
        Base step of the quadrature grid; the grid is refined near ``y_c``.
    y_max : float, optional
        Extent of the stored grid (default ``2 y_c``); ``g`` is flat past ``y_c``.
    """
    beta = check_positive(beta, "beta")
    h = check_positive(h, "h")
    if not isinstance(speeds, SpeedTable) or not speeds.covers_critical_to_one():
        raise ValueError("speed table must cover [p_c, 1]; pin its end points first")
    y_c = scaled_critical_height(beta)
    y, g = integrate_profile(speeds.interpolate, beta, h, y_c)
    y_max = 2 * y_c if y_max is None else max(float(y_max), y_c)
    if y_max > y_c:
        y = np.r_[y, y_max]
        g = np.r_[g, g[-1]]
    return ShapeCurve(beta=beta, y_grid=y, g_values=g, y_c=y_c,
                      alpha_source=dict(speeds.provenance, grid=[float(p) for p in speeds.p]))


def envelope(curve: ShapeCurve, t, k):
    """``Gamma_t(k) = t**(1/beta) g(k / t**(1/beta))``."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("heights must be non-negative")
    scale = float(t) ** (1.0 / curve.beta)
    out = scale * np.asarray(curve.g(k / scale))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EnvelopeReport:
    eta: float
    N: float
    height: int
    outer_heights: int
    outer_violations: int
    inner_heights: int
    inner_violations: int
    inner_applicable: bool
    height_exceeds: bool
    max_outer_excursion: float
    min_inner_excursion: float

    @property
    def outer_fraction(self) -> float:
        return self.outer_violations / self.outer_heights if self.outer_heights else 0.0

    @property
    def inner_fraction(self) -> float:
        """Violation fraction among heights checked; NaN when not applicable."""
        if not self.inner_applicable or not self.inner_heights:
            return float("nan")
        return self.inner_violations / self.inner_heights

    def to_dict(self):
        d = dict(self.__dict__)
        d["outer_fraction"] = self.outer_fraction
        d["inner_fraction"] = self.inner_fraction
        return d


def check_envelope(cluster: Cluster, curve: ShapeCurve, t, eta) -> EnvelopeReport:
    """Compare the cluster's left/right edges with ``(1 +/- eta) Gamma_t``.

    Outer bound: heights ``k <= (1+eta)N`` where ``r_t(k) > (1+eta)Gamma_t(k)``
    or ``l_t(k) < -(1+eta)Gamma_t(k)``. Inner bound: heights
    ``k <= (1-eta)N`` where ``r_t(k) < (1-eta)Gamma_t(k)`` or
    ``l_t(k) > -(1-eta)Gamma_t(k)``; it only applies when the cluster reaches
    ``(1-eta)N`` (otherwise ``inner_applicable`` is false).
    """
    if not 0 < eta:
        raise ValueError("eta must be positive")
    N = critical_height(curve.beta, t)
    H = cluster.height
    k_out = int(math.floor((1 + eta) * N))
    k_in = int(math.floor((1 - eta) * N)) if eta < 1 else -1

    ks = np.arange(min(H, k_out) + 1)
    gam = np.asarray(envelope(curve, t, ks), dtype=float)
    r = cluster.right[ks]
    l = cluster.left[ks]
    outer_bad = (r > (1 + eta) * gam) | (l < -(1 + eta) * gam)
    with np.errstate(divide="ignore", invalid="ignore"):
        reach = np.maximum(r, -l) / gam
        inner_reach = np.minimum(r, -l) / gam
    pos = gam > 0
    max_out = float(np.max(reach[pos]) - 1) if pos.any() else float("nan")

    inner_applicable = k_in >= 0 and H >= k_in
    ki = ks[: min(H, max(k_in, -1)) + 1]
    gi = gam[: ki.size]
    inner_bad = (cluster.right[ki] < (1 - eta) * gi) | (cluster.left[ki] > -(1 - eta) * gi)
    posi = gi > 0
    min_in = float(np.min(inner_reach[: ki.size][posi]) - 1) if posi.any() else float("nan")

    return EnvelopeReport(
        eta=float(eta), N=float(N), height=int(H),
        outer_heights=k_out + 1, outer_violations=int(outer_bad.sum()),
        inner_heights=int(ki.size), inner_violations=int(inner_bad.sum()),
        inner_applicable=bool(inner_applicable),
        height_exceeds=bool(H > k_out),
        max_outer_excursion=max_out, min_inner_excursion=min_in,
    )


class LimitShape(BaseEstimator):
    """Estimator wrapper around :func:`build_shape`.

    ``fit`` takes a :class:`SpeedTable` (pinned automatically) or a fitted
    :class:`~op_poisson_lab.estimators.EdgeSpeedEstimator`; ``predict`` returns
    ``g`` at scaled heights.
    """

    def __init__(self, beta=1.0, h=1e-3, y_max=None):
        self.beta = beta
        self.h = h
        self.y_max = y_max

    def fit(self, X, y=None):
        table = getattr(X, "table_", X)
        if not isinstance(table, SpeedTable):
            raise TypeError("LimitShape.fit expects a SpeedTable or a fitted EdgeSpeedEstimator")
        if not table.covers_critical_to_one():
            table = table.pinned()
        self.curve_ = build_shape(self.beta, table, self.h, self.y_max)
        return self

    def predict(self, X):
        check_is_fitted(self, "curve_")
        return self.curve_.g(np.ravel(np.asarray(X, dtype=float)))

    def envelope(self, t, k):
        check_is_fitted(self, "curve_")
        return envelope(self.curve_, t, k)
