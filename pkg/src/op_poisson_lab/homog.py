"""Homogeneous oriented bond percolation.

Clusters are grown level by level from either the origin or a half-line
seed ``{(x, 0): -W <= x <= 0}``. With ``W >= 2K`` the half-line right edge
``r_k`` agrees with the infinite half-line for every ``k <= K`` as long as
``r_k >= k - W`` (a seed left of ``-W`` reaches at most ``k - W`` by height
``k``); lower values are flagged as truncated.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._validation import check_int, check_probability, chunked_map
from .cluster import Cluster
from .lattice import Site, _check_seed, stream_key

__all__ = [
    "P_C",
    "HomogParams",
    "RightEdgePath",
    "SurvivalSample",
    "DualOutcome",
    "SurvivalBatch",
    "ExactLaw",
    "SiteCapExceeded",
    "TruncationWarning",
    "grow_cluster",
    "right_edge",
    "survival_depth",
    "dual_survival",
    "sample_right_edges",
    "sample_survival",
    "sample_dual_depths",
    "exact_enumeration",
]

#: critical value of oriented bond percolation on the square lattice
P_C = 0.64470019

DEFAULT_MAX_SITES = 200_000_000
MAX_ENUM_EDGES = 24


class SiteCapExceeded(RuntimeError):
    """A cluster grew past the configured occupied-site cap."""


class TruncationWarning(UserWarning):
    """The half-line right edge came close enough to the seed cut-off to feel it."""


@dataclass(frozen=True)
class HomogParams:
    p: float
    max_height: int
    seed: str = "origin"
    width: int | None = None

    def __post_init__(self):
        check_probability(self.p)
        check_int(self.max_height, "max_height", minimum=1)
        if self.seed not in ("origin", "half_line"):
            raise ValueError(f"seed geometry must be 'origin' or 'half_line', got {self.seed!r}")
        if self.seed == "half_line":
            w = self.seed_width
            if w < 2 * self.max_height:
                raise ValueError(f"half-line width {w} is below 2K = {2 * self.max_height}")
            if w % 2:
                raise ValueError("half-line width must be even so seed sites lie on the lattice")

    @property
    def seed_width(self) -> int:
        if self.seed == "origin":
            return 0
        return 2 * self.max_height if self.width is None else int(self.width)

    def probs(self) -> np.ndarray:
        return np.full(self.max_height, float(self.p))


@dataclass(frozen=True)
class RightEdgePath:
    """Right edge ``r[k]`` for ``k = 0..K``; NaN once the process has died."""

    r: np.ndarray
    truncated: bool = False

    @property
    def alive(self) -> bool:
        return bool(np.isfinite(self.r[-1]))


@dataclass(frozen=True)
class SurvivalSample:
    tau: int
    censored: bool


@dataclass(frozen=True)
class DualOutcome:
    survived: bool
    depth: int


@dataclass(frozen=True)
class SurvivalBatch:
    """Per-replicate survival depth ``tau``, censoring flag, rightmost reach ``R0``
    and right edge ``r_K`` at the censor height (NaN when level ``K`` is empty)."""

    tau: np.ndarray
    censored: np.ndarray
    reach: np.ndarray
    K: int
    r_K: np.ndarray | None = None


def _grow(params: HomogParams, seed, replicate, record, max_sites) -> Cluster:
    key = stream_key(seed, replicate)
    status, counts, left, right, ptr, lo, hi = _kernels.grow(
        key, 0, -params.seed_width, 0, params.probs(), record, max_sites
    )
    if status == _kernels.STATUS_SITE_CAP:
        raise SiteCapExceeded(
            f"cluster exceeded {max_sites} occupied sites (seed={seed}, replicate={replicate})"
        )
    censored = counts[-1] > 0
    if record:
        return Cluster.from_kernel(counts, left, right, ptr, lo, hi, censored=censored)
    return Cluster.from_kernel(counts, left, right, censored=censored)


def grow_cluster(params: HomogParams, seed: int = 0, replicate: int = 0,
                 max_sites: int = DEFAULT_MAX_SITES) -> Cluster:
    """Grow the cluster of the seed up to height ``params.max_height``.

    Raises
    ------
    SiteCapExceeded
        If more than ``max_sites`` sites become occupied.
    """
    return _grow(params, seed, replicate, True, max_sites)


def right_edge(params: HomogParams, seed: int = 0, replicate: int = 0) -> RightEdgePath:
    if params.seed != "half_line":
        raise ValueError("right_edge needs a half-line seed")
    if params.p <= 0:
        raise ValueError("right_edge needs p > 0")
    c = _grow(params, seed, replicate, False, 0)
    K = params.max_height
    r = np.full(K + 1, np.nan)
    r[: c.height + 1] = c.right
    ok = np.isfinite(r)
    truncated = bool(np.any(r[ok] < (np.arange(K + 1) - params.seed_width)[ok]))
    if truncated:
        warnings.warn("right edge came within reach of the seed cut-off",
                      TruncationWarning, stacklevel=2)
    return RightEdgePath(r=r, truncated=truncated)


def survival_depth(params: HomogParams, seed: int = 0, replicate: int = 0) -> SurvivalSample:
    c = _grow(params, seed, replicate, False, 0)
    return SurvivalSample(tau=c.height, censored=c.censored)


def dual_survival(w: Site, p: float, cutoff: int, seed: int = 0, replicate: int = 0) -> DualOutcome:
    """Run the reversed-orientation cluster of ``w`` downward for ``cutoff`` levels.

    The dual reads the same edge variates as the forward process; edges below
    height 0 are drawn from the same keyed stream, i.e. the homogeneous
    process lives on the whole plane here.
    """
    p = check_probability(p)
    cutoff = check_int(cutoff, "cutoff", minimum=1)
    key = stream_key(seed, replicate)
    probs = np.full(cutoff, p)
    depth, _ = _kernels.dual_grow(key, w.m, w.n, probs, w.n - cutoff, cutoff)
    return DualOutcome(survived=depth == cutoff, depth=int(depth))


# -- batched samplers used by the estimators -------------------------------------

def _replicate_ids(replicates, offset=0):
    check_int(replicates, "replicates", minimum=1)
    return np.arange(offset, offset + replicates, dtype=np.int64)


def sample_right_edges(p: float, K: int, replicates: int, seed: int = 0, workers=None,
                       offset: int = 0) -> tuple[np.ndarray, int]:
    """``r_K`` of the half-line seed (width ``2K``) for each replicate.

    Returns the values (NaN where level ``K`` is empty) and the number of
    replicates whose edge came within reach of the cut-off (``r_k < k - 2K``).
    """
    p = check_probability(p)
    K = check_int(K, "K", minimum=1)
    W = 2 * K
    probs = np.full(K, p)
    ks = np.arange(K + 1) - W
    useed = np.uint64(_check_seed(seed))

    def run(chunk):
        counts, _, right = _kernels.grow_profile_batch(useed, chunk, 0, -W, 0, probs)
        alive = counts[:, K] > 0
        rk = np.where(alive, right[:, K], np.nan).astype(float)
        trunc = ((right < ks) & (counts > 0)).any(axis=1)
        return rk, int(trunc.sum())

    parts = chunked_map(run, _replicate_ids(replicates, offset), workers)
    return np.concatenate([a for a, _ in parts]), sum(b for _, b in parts)


def sample_survival(p: float, K: int, replicates: int, seed: int = 0, workers=None,
                    offset: int = 0) -> SurvivalBatch:
    """Survival depth and rightmost reach of origin-seeded clusters."""
    p = check_probability(p)
    K = check_int(K, "K", minimum=1)
    probs = np.full(K, p)
    useed = np.uint64(_check_seed(seed))

    def run(chunk):
        counts, _, right = _kernels.grow_profile_batch(useed, chunk, 0, 0, 0, probs)
        alive = counts > 0
        tau = alive.sum(axis=1) - 1
        reach = np.where(alive, right, np.iinfo(np.int64).min).max(axis=1)
        r_K = np.where(alive[:, K], right[:, K], np.nan)
        return tau, alive[:, K], reach, r_K

    parts = chunked_map(run, _replicate_ids(replicates, offset), workers)
    return SurvivalBatch(
        tau=np.concatenate([x[0] for x in parts]),
        censored=np.concatenate([x[1] for x in parts]),
        reach=np.concatenate([x[2] for x in parts]),
        K=K,
        r_K=np.concatenate([x[3] for x in parts]),
    )


def sample_dual_depths(w: Site, p: float, cutoff: int, replicates: int, seed: int = 0,
                       workers=None, offset: int = 0) -> np.ndarray:
    """Depth reached by the dual cluster of ``w``; equal to ``cutoff`` on survival."""
    p = check_probability(p)
    cutoff = check_int(cutoff, "cutoff", minimum=1)
    probs = np.full(cutoff, p)
    useed = np.uint64(_check_seed(seed))

    def run(chunk):
        depth, _ = _kernels.dual_depth_batch(useed, chunk, w.m, w.n, probs, w.n - cutoff, cutoff)
        return depth

    return np.concatenate(chunked_map(run, _replicate_ids(replicates, offset), workers))


# -- exact oracle -----------------------------------------------------------------

@dataclass(frozen=True)
class ExactLaw:
    """Exact law of ``tau`` (censored at ``K``) and ``r_K`` (``None`` when dead)."""

    K: int
    tau: dict
    r_K: dict = field(default_factory=dict)
    n_edges: int = 0

    def prob_survive(self, k: int) -> float:
        return float(sum(v for t, v in self.tau.items() if t >= k))


def _level_sites(n, W):
    return list(range(-W - n, n + 1, 2))


def exact_enumeration(p: float, K: int, seed: str = "origin") -> ExactLaw:
    """Enumerate all ``2**E`` open/closed configurations of the edges that can
    matter up to height ``K`` and return the exact laws of ``tau`` and ``r_K``.

    Deliberately independent of the compiled growth kernels.
    """
    p = check_probability(p)
    K = check_int(K, "K", minimum=1)
    if K > 4:
        raise ValueError("exact enumeration supports K <= 4")
    W = 0 if seed == "origin" else 2 * K
    if seed not in ("origin", "half_line"):
        raise ValueError(f"unknown seed geometry {seed!r}")

    edges = []  # (level, from_m, to_m)
    for n in range(K):
        for m in _level_sites(n, W):
            edges.append((n, m, m + 1))
            edges.append((n, m, m - 1))
    E = len(edges)
    if E > MAX_ENUM_EDGES:
        raise ValueError(f"{E} edges exceed the enumeration limit of {MAX_ENUM_EDGES}")

    configs = np.arange(2**E, dtype=np.int64)
    bits = ((configs[:, None] >> np.arange(E)) & 1).astype(bool)
    n_open = bits.sum(axis=1)
    weight = p**n_open * (1.0 - p) ** (E - n_open)

    occ = {m: np.ones(configs.size, bool) for m in _level_sites(0, W)}
    tau = np.zeros(configs.size, np.int64)
    for n in range(K):
        nxt = {m: np.zeros(configs.size, bool) for m in _level_sites(n + 1, W)}
        for e, (lvl, a, b) in enumerate(edges):
            if lvl == n:
                nxt[b] |= occ[a] & bits[:, e]
        occ = nxt
        alive = np.zeros(configs.size, bool)
        for v in occ.values():
            alive |= v
        tau[alive] = n + 1

    top = np.full(configs.size, np.iinfo(np.int64).min)
    for m, v in occ.items():
        top[v] = np.maximum(top[v], m)

    tau_law = {k: float(weight[tau == k].sum()) for k in range(K + 1)}
    r_law = {}
    for val, key in itertools.chain([(np.iinfo(np.int64).min, None)],
                                    ((m, m) for m in _level_sites(K, W))):
        mass = float(weight[top == val].sum())
        if mass > 0:
            r_law[key] = mass
    return ExactLaw(K=K, tau=tau_law, r_K=r_law, n_edges=E)
