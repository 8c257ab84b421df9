"""Box densities of the Poisson cluster against the homogeneous survival probability.

The plane is tiled by half-open boxes of side ``s = N**a`` anchored at the
origin. Only half of the integer points of a box lie on the oriented lattice,
so the normalised density ``D = count / s**2`` is at most 1/2; the
comparison with ``theta`` uses ``2D``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cluster import Cluster
from .estimators import ThetaTable
from .poisson import critical_height, rho
from .shape import ShapeCurve, envelope

__all__ = ["BoxGrid", "DensityReport", "EmptyRegionWarning", "build_grid", "box_counts",
           "measure_density", "in_region"]


class EmptyRegionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BoxGrid:
    beta: float
    t: float
    a: float
    eta: float
    N: float
    side: float
    i: np.ndarray
    j: np.ndarray
    in_lambda: np.ndarray

    @property
    def x_center(self):
        return (self.i + 0.5) * self.side

    @property
    def y_center(self):
        return (self.j + 0.5) * self.side

    @property
    def n_lambda(self) -> int:
        return int(self.in_lambda.sum())


def in_region(curve: ShapeCurve, t, eta, x, y):
    """Membership of points ``(x, y)`` in ``G(t, eta)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    N = critical_height(curve.beta, t)
    ok = (y >= 0) & (y <= (1 - eta) * N)
    gam = np.asarray(envelope(curve, t, np.clip(y, 0, None)), dtype=float)
    return ok & (np.abs(x) <= (1 - eta) * gam)


def build_grid(curve: ShapeCurve, t, a=0.7, eta=0.25) -> BoxGrid:
    """Tile ``[-N, N] x [0, N]`` with side ``N**a`` boxes and mark those inside ``G(t, eta)``.

    A box is kept when all four corners lie in the region; since the region's
    half-width is non-decreasing in height, the corner test is exact.
    """
    if not 0.5 < a < 1:
        raise ValueError(f"box exponent a must lie in (1/2, 1), got {a}")
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    N = critical_height(curve.beta, t)
    if N <= 1:
        raise ValueError(f"N = {N:.3g} is too small to tile")
    s = N**a
    ii = np.arange(math.floor(-N / s), math.ceil(N / s))
    jj = np.arange(0, math.ceil(N / s))
    I, J = np.meshgrid(ii, jj, indexing="ij")
    I, J = I.ravel(), J.ravel()
    x0, x1, y0, y1 = I * s, (I + 1) * s, J * s, (J + 1) * s
    inside = np.ones(I.size, bool)
    for x, y in ((x0, y0), (x1, y0), (x0, y1), (x1, y1)):
        inside &= in_region(curve, t, eta, x, y)
    if not inside.any():
        warnings.warn(f"no box of side {s:.1f} fits in G(t={t}, eta={eta})", EmptyRegionWarning,
                      stacklevel=2)
    return BoxGrid(beta=curve.beta, t=float(t), a=float(a), eta=float(eta), N=N, side=s,
                   i=I, j=J, in_lambda=inside)


def box_counts(cluster: Cluster, grid: BoxGrid, mask=None) -> np.ndarray:
    """Occupied sites in each half-open box (restricted to ``mask`` if given)."""
    mask = np.ones(grid.i.size, bool) if mask is None else np.asarray(mask, bool)
    out = np.zeros(grid.i.size, np.int64)
    s = grid.side
    for j in np.unique(grid.j[mask]):
        sel = np.flatnonzero(mask & (grid.j == j))
        edges = np.unique(np.r_[grid.i[sel] * s, (grid.i[sel] + 1) * s])
        lo_idx = np.searchsorted(edges, grid.i[sel] * s)
        hi_idx = np.searchsorted(edges, (grid.i[sel] + 1) * s)
        k0 = max(0, math.ceil(j * s))
        k1 = min(cluster.height, math.ceil((j + 1) * s) - 1)
        acc = np.zeros(edges.size, np.int64)
        for k in range(k0, k1 + 1):
            acc += cluster.count_below(k, edges)
        out[sel] = acc[hi_idx] - acc[lo_idx]
    return out


@dataclass(frozen=True)
class DensityReport:
    i: np.ndarray
    j: np.ndarray
    x_center: np.ndarray
    y_center: np.ndarray
    D: np.ndarray
    theta_ref: np.ndarray
    deviation: np.ndarray

    @property
    def box_count(self) -> int:
        return int(self.i.size)

    @property
    def sup_deviation(self) -> float:
        return float(self.deviation.max()) if self.deviation.size else float("nan")

    def to_rows(self):
        for k in range(self.box_count):
            yield (int(self.i[k]), int(self.j[k]), float(self.x_center[k]),
                   float(self.y_center[k]), float(self.D[k]), float(2 * self.D[k]),
                   float(self.theta_ref[k]), float(self.deviation[k]))

    def to_csv(self, path, replicate=None):
        header = ["i", "j", "x_center", "y_center", "D", "2D", "theta_ref", "deviation"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow((["replicate"] if replicate is not None else []) + header)
            for row in self.to_rows():
                w.writerow(([replicate] if replicate is not None else []) + [repr(v) if
                           isinstance(v, float) else v for v in row])


def measure_density(cluster: Cluster, grid: BoxGrid, theta: ThetaTable) -> DensityReport:
    """Per-box ``D`` over ``Lambda(t, eta)`` and the sup of ``|2D - theta(rho(y_center, t))|``."""
    sel = grid.in_lambda
    counts = box_counts(cluster, grid, sel)[sel]
    D = counts / grid.side**2
    yc = grid.y_center[sel]
    ref = np.asarray(theta.interpolate(rho(yc, grid.t, grid.beta)), dtype=float) if yc.size \
        else np.empty(0)
    return DensityReport(i=grid.i[sel], j=grid.j[sel], x_center=grid.x_center[sel],
                         y_center=yc, D=D, theta_ref=ref, deviation=np.abs(2 * D - ref))
