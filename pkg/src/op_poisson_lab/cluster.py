"""Run-length cluster storage and its CSV form.

A cluster is stored level by level as sorted, inclusive runs of occupied
x-coordinates (consecutive lattice sites at one height differ by 2 in x).
Levels are indexed by height ``k = 0 .. height``; an oriented cluster has no
empty level below its top, so every stored level is non-empty.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["Cluster", "ClusterFormatError"]


class ClusterFormatError(ValueError):
    """Malformed cluster CSV; the message carries the offending line number."""


@dataclass(frozen=True, eq=False)
class Cluster:
    counts: np.ndarray
    left: np.ndarray
    right: np.ndarray
    run_ptr: np.ndarray | None = None
    run_lo: np.ndarray | None = None
    run_hi: np.ndarray | None = None
    censored: bool = False

    @classmethod
    def from_kernel(cls, counts, left, right, run_ptr=None, run_lo=None, run_hi=None,
                    censored=False):
        alive = np.flatnonzero(counts > 0)
        top = int(alive[-1]) if alive.size else 0
        if run_ptr is not None:
            run_ptr = np.asarray(run_ptr[: top + 2], dtype=np.int64)
            n_runs = int(run_ptr[-1])
            run_lo = np.asarray(run_lo[:n_runs], dtype=np.int64)
            run_hi = np.asarray(run_hi[:n_runs], dtype=np.int64)
        return cls(
            counts=np.asarray(counts[: top + 1], dtype=np.int64),
            left=np.asarray(left[: top + 1], dtype=np.int64),
            right=np.asarray(right[: top + 1], dtype=np.int64),
            run_ptr=run_ptr, run_lo=run_lo, run_hi=run_hi,
            censored=bool(censored),
        )

    @property
    def height(self) -> int:
        return self.counts.shape[0] - 1

    @property
    def n_sites(self) -> int:
        return int(self.counts.sum())

    @property
    def has_sites(self) -> bool:
        return self.run_ptr is not None

    def _require_sites(self):
        if self.run_ptr is None:
            raise ValueError("cluster was grown without site records")

    def runs(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        self._require_sites()
        if not 0 <= k <= self.height:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        a, b = self.run_ptr[k], self.run_ptr[k + 1]
        return self.run_lo[a:b], self.run_hi[a:b]

    def level(self, k: int) -> np.ndarray:
        """Sorted x-coordinates of occupied sites at height ``k``."""
        lo, hi = self.runs(k)
        if lo.size == 0:
            return np.empty(0, np.int64)
        return np.concatenate([np.arange(a, b + 1, 2) for a, b in zip(lo, hi)])

    def sites(self) -> tuple[np.ndarray, np.ndarray]:
        ms = [self.level(k) for k in range(self.height + 1)]
        ns = [np.full(m.size, k, np.int64) for k, m in enumerate(ms)]
        return np.concatenate(ms), np.concatenate(ns)

    def contains(self, m: int, n: int) -> bool:
        if (m + n) % 2 or not 0 <= n <= self.height:
            return False
        lo, hi = self.runs(n)
        i = np.searchsorted(lo, m, side="right") - 1
        return bool(i >= 0 and m <= hi[i])

    def count_below(self, k: int, xs) -> np.ndarray:
        """Number of occupied sites at height ``k`` with x-coordinate ``< xs``."""
        xs = np.asarray(xs, dtype=float)
        lo, hi = self.runs(k)
        if lo.size == 0:
            return np.zeros(xs.shape, np.int64)
        sizes = (hi - lo) // 2 + 1
        before = np.concatenate([[0], np.cumsum(sizes)])
        j = np.searchsorted(lo, xs, side="left")
        out = np.zeros(xs.shape, np.int64)
        has = j > 0
        jj = j[has] - 1
        # largest lattice x strictly below the threshold, same parity as k
        xt = np.ceil(xs[has]).astype(np.int64) - 1
        xt -= (xt + k) % 2
        top = np.minimum(hi[jj], xt)
        out[has] = before[jj] + (top - lo[jj]) // 2 + 1
        return out

    def count_in_box(self, x0, x1, y0, y1) -> int:
        """Occupied sites in the half-open box ``[x0, x1) x [y0, y1)``."""
        k_lo = max(0, int(np.ceil(y0)))
        k_hi = min(self.height, int(np.ceil(y1)) - 1)
        total = 0
        for k in range(k_lo, k_hi + 1):
            c = self.count_below(k, [x0, x1])
            total += int(c[1] - c[0])
        return total

    def issubset(self, other: "Cluster") -> bool:
        if self.height > other.height:
            return False
        for k in range(self.height + 1):
            if not np.isin(self.level(k), other.level(k), assume_unique=True).all():
                return False
        return True

    # -- serialisation ---------------------------------------------------
    def to_csv(self, path, sites: bool = True) -> None:
        """One record per height: ``k, left, right, count, runs``.

        ``runs`` is a space-separated list of ``lo:hi`` inclusive x-ranges, or
        empty when ``sites`` is false.
        """
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "left", "right", "count", "runs"])
            for k in range(self.height + 1):
                runs = ""
                if sites and self.run_ptr is not None:
                    lo, hi = self.runs(k)
                    runs = " ".join(f"{a}:{b}" for a, b in zip(lo, hi))
                w.writerow([k, int(self.left[k]), int(self.right[k]), int(self.counts[k]), runs])

    @classmethod
    def from_csv(cls, path) -> "Cluster":
        path = Path(path)
        counts, left, right = [], [], []
        ptr, lo_all, hi_all = [0], [], []
        with_runs = None
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64))
            if header[:4] != ["k", "left", "right", "count"]:
                raise ClusterFormatError(f"{path}:1: unexpected header {header!r}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    k, lft, rgt, cnt = (int(v) for v in row[:4])
                    runs = row[4].split() if len(row) > 4 else []
                except (ValueError, IndexError) as exc:
                    raise ClusterFormatError(f"{path}:{lineno}: {exc}") from None
                if k != len(counts):
                    raise ClusterFormatError(f"{path}:{lineno}: expected height {len(counts)}, got {k}")
                if with_runs is None:
                    with_runs = bool(runs)
                n_here = 0
                for token in runs:
                    try:
                        a, b = (int(v) for v in token.split(":"))
                    except ValueError:
                        raise ClusterFormatError(f"{path}:{lineno}: bad run {token!r}") from None
                    if (a + k) % 2 or (b + k) % 2 or b < a:
                        raise ClusterFormatError(f"{path}:{lineno}: run {token!r} off the lattice")
                    lo_all.append(a)
                    hi_all.append(b)
                    n_here += (b - a) // 2 + 1
                if with_runs and n_here != cnt:
                    raise ClusterFormatError(f"{path}:{lineno}: runs hold {n_here} sites, count says {cnt}")
                ptr.append(len(lo_all))
                counts.append(cnt)
                left.append(lft)
                right.append(rgt)
        arr = lambda v: np.asarray(v, dtype=np.int64)  # noqa: E731
        if not with_runs:
            return cls(arr(counts), arr(left), arr(right))
        return cls(arr(counts), arr(left), arr(right), arr(ptr), arr(lo_all), arr(hi_all))
