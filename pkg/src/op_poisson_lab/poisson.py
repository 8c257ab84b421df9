"""Poisson percolation on the oriented lattice.

An edge with midpoint height ``y`` is open at time ``t`` with probability
``rho(y, t) = 1 - exp(-t * y**-beta)``. Edges leaving height ``n`` use
``y = n + 1/2``. The same per-edge uniform decides openness for every ``t``,
so clusters are monotone in ``t`` under a shared seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._validation import check_int, check_positive, check_probability, chunked_map, ordered_map
from .cluster import Cluster
from .homog import DEFAULT_MAX_SITES, P_C, SiteCapExceeded
from .lattice import Site, _check_seed, stream_key

__all__ = [
    "PoissonParams",
    "rho",
    "height_scale",
    "critical_height",
    "level_probs",
    "default_cutoff",
    "grow_poisson_cluster",
    "grow_poisson_clusters",
    "sample_poisson_profiles",
    "dual_membership_estimate",
]


@dataclass(frozen=True)
class PoissonParams:
    beta: float
    t: float
    max_height_cap: int | None = None

    def __post_init__(self):
        check_positive(self.beta, "beta")
        check_positive(self.t, "t", strict=False)
        if self.max_height_cap is not None:
            check_int(self.max_height_cap, "max_height_cap", minimum=1)

    @property
    def N(self) -> float:
        """Height at which edges are open with probability ``p_c``."""
        return critical_height(self.beta, self.t)

    @property
    def cap(self) -> int:
        if self.max_height_cap is not None:
            return int(self.max_height_cap)
        return max(1, int(math.ceil(2 * self.N)))


def rho(y, t, beta):
    """Opening probability of an edge with midpoint height ``y`` at time ``t``."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("rho is defined for midpoint heights y > 0 only")
    out = -np.expm1(-t * y ** (-float(beta)))
    return float(out) if out.ndim == 0 else out


def height_scale(p, t, beta) -> float:
    """Real solution ``y`` of ``rho(y, t) = p``, i.e. ``(t / -log(1 - p))**(1/beta)``."""
    p = check_probability(p, open_interval=True)
    t = check_positive(t, "t")
    check_positive(beta, "beta")
    return (t / -math.log1p(-p)) ** (1.0 / beta)


def critical_height(beta, t) -> float:
    """``N``: the height scale at ``p_c``; zero at ``t = 0``."""
    if t == 0:
        return 0.0
    return height_scale(P_C, t, beta)


def level_probs(params: PoissonParams, n_levels: int, first_level: int = 0) -> np.ndarray:
    """Opening probabilities of edges leaving heights ``first_level, ...``."""
    if n_levels <= 0:
        return np.empty(0)
    if params.t == 0:
        return np.zeros(n_levels)
    y = np.arange(first_level, first_level + n_levels) + 0.5
    return -np.expm1(-params.t * y ** (-params.beta))


def default_cutoff(N: float) -> int:
    """Look-ahead depth ``ceil(log(N)**2)`` (at least 1)."""
    if N <= math.e:
        return 1
    return int(math.ceil(math.log(N) ** 2))


def grow_poisson_cluster(params: PoissonParams, seed: int = 0, replicate: int = 0,
                         record: bool = True, max_sites: int = DEFAULT_MAX_SITES) -> Cluster:
    """Grow ``C_0(t)`` up to the height cap.

    A cluster still alive at the cap is returned with ``censored=True``.

    Raises
    ------
    SiteCapExceeded
        If the cluster holds more than ``max_sites`` sites.
    """
    cap = params.cap
    key = stream_key(seed, replicate)
    status, counts, left, right, ptr, lo, hi = _kernels.grow(
        key, 0, 0, 0, level_probs(params, cap), record, max_sites
    )
    if status == _kernels.STATUS_SITE_CAP:
        raise SiteCapExceeded(
            f"Poisson cluster exceeded {max_sites} sites (seed={seed}, replicate={replicate})"
        )
    censored = counts[-1] > 0
    if record:
        return Cluster.from_kernel(counts, left, right, ptr, lo, hi, censored=censored)
    return Cluster.from_kernel(counts, left, right, censored=censored)


def grow_poisson_clusters(params: PoissonParams, replicates, seed: int = 0, record: bool = True,
                          workers=None, max_sites: int = DEFAULT_MAX_SITES) -> list[Cluster]:
    """One cluster per replicate index, in index order."""
    return ordered_map(
        lambda r: grow_poisson_cluster(params, seed, int(r), record=record, max_sites=max_sites),
        replicates, workers,
    )


def sample_poisson_profiles(params: PoissonParams, replicates, seed: int = 0, n_levels=None,
                            workers=None):
    """Count/left/right profiles (``R x (n_levels + 1)``) without site records."""
    n_levels = params.cap if n_levels is None else int(n_levels)
    probs = level_probs(params, n_levels)
    useed = np.uint64(_check_seed(seed))
    reps = np.asarray(replicates, dtype=np.int64)

    def run(chunk):
        return _kernels.grow_profile_batch(useed, chunk, 0, 0, 0, probs)

    parts = chunked_map(run, reps, workers)
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def dual_membership_estimate(w: Site, params: PoissonParams, cutoff: int | None = None,
                             seed: int = 0, replicate: int = 0) -> bool:
    """Proxy for ``w in C_0(t)``: does the dual cluster of ``w`` live ``cutoff`` levels?

    When ``w`` sits at most ``cutoff`` levels above the origin the dual is run
    to height 0 and the answer is exact membership. ``cutoff`` defaults to
    ``ceil(log(N)**2)``.
    """
    if cutoff is None:
        cutoff = default_cutoff(params.N)
    cutoff = check_int(cutoff, "cutoff", minimum=1)
    if w.n == 0:
        return w.m == 0
    if params.t == 0:
        return False
    depth_needed = min(cutoff, w.n)
    key = stream_key(seed, replicate)
    base = w.n - depth_needed
    probs = level_probs(params, depth_needed, first_level=base)
    depth, hit = _kernels.dual_grow(key, w.m, w.n, probs, base, depth_needed)
    if depth_needed == w.n:
        return bool(hit)
    return depth == depth_needed
