"""Oriented lattice conventions and keyed per-edge randomness.

Sites are ``(m, n)`` with ``m + n`` even and ``n >= 0``; edges point from
``(m, n)`` to ``(m + 1, n + 1)`` (NE) or ``(m - 1, n + 1)`` (NW). An edge
leaving height ``n`` has midpoint height ``n + 1/2``.

Each edge carries one uniform variate that is a pure function of
``(seed, replicate, m, n, direction)``. An edge is open at parameter ``p`` iff
its variate is below ``p``, so a single stream couples every ``p`` (and every
``t`` in the Poisson process) monotonically.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import _kernels

__all__ = [
    "Direction",
    "Site",
    "Edge",
    "RandomnessKey",
    "neighbors_up",
    "edge_uniform",
    "edge_uniforms",
    "stream_key",
    "MAX_SEED",
]

MAX_SEED = 2**64 - 1


class Direction(IntEnum):
    NE = _kernels.NE
    NW = _kernels.NW


@dataclass(frozen=True, order=True)
class Site:
    m: int
    n: int

    def __post_init__(self):
        if (self.m + self.n) % 2:
            raise ValueError(f"site ({self.m}, {self.n}) violates the parity rule m + n even")
        if self.n < 0:
            raise ValueError(f"site height must be >= 0, got {self.n}")


@dataclass(frozen=True)
class Edge:
    start: Site
    direction: Direction

    @property
    def end(self) -> Site:
        dm = 1 if self.direction == Direction.NE else -1
        return Site(self.start.m + dm, self.start.n + 1)

    @property
    def midpoint_height(self) -> float:
        return self.start.n + 0.5


@dataclass(frozen=True)
class RandomnessKey:
    seed: int
    replicate: int
    edge: Edge


def neighbors_up(site: Site) -> tuple[Site, Site]:
    """Return the NE and NW successors of ``site``."""
    return Site(site.m + 1, site.n + 1), Site(site.m - 1, site.n + 1)


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def stream_key(seed: int, replicate: int) -> np.uint64:
    """Key of the edge stream for one replicate of an experiment."""
    seed = _check_seed(seed)
    if replicate < 0:
        raise ValueError("replicate index must be non-negative")
    return np.uint64(_kernels.stream_key(np.uint64(seed), np.uint64(replicate)))


def edge_uniform(key: RandomnessKey) -> float:
    """Uniform(0, 1) variate of ``key.edge`` in stream ``(key.seed, key.replicate)``."""
    skey = stream_key(key.seed, key.replicate)
    e = key.edge
    return float(_kernels.edge_u_scalar(skey, e.start.m, e.start.n, int(e.direction)))


def edge_uniforms(seed, replicate, m, n, direction) -> np.ndarray:
    """Vectorised :func:`edge_uniform` over arrays of edge coordinates.

    Coordinates are not parity-checked here; callers pass lattice edges.
    """
    m, n, d = np.broadcast_arrays(
        np.asarray(m, dtype=np.int64), np.asarray(n, dtype=np.int64),
        np.asarray(direction, dtype=np.int64),
    )
    skey = stream_key(seed, replicate)
    return _kernels.edge_u_many(skey, m.ravel(), n.ravel(), d.ravel()).reshape(m.shape)
