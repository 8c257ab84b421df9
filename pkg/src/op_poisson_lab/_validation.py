"""Argument checks shared by the public entry points."""

from __future__ import annotations

import numbers
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

WORKERS_ENV = "OP_POISSON_LAB_WORKERS"


def check_probability(p, name="p", open_interval=False) -> float:
    if not isinstance(p, numbers.Real) or isinstance(p, bool):
        raise TypeError(f"{name} must be a real number, got {type(p).__name__}")
    p = float(p)
    if open_interval and not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {p}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p


def check_positive(x, name, strict=True) -> float:
    if not isinstance(x, numbers.Real) or isinstance(x, bool) or not np.isfinite(x):
        raise ValueError(f"{name} must be a finite real number, got {x!r}")
    x = float(x)
    if x < 0 or (strict and x == 0):
        raise ValueError(f"{name} must be {'> 0' if strict else '>= 0'}, got {x}")
    return x


def check_int(x, name, minimum=None) -> int:
    if not isinstance(x, numbers.Integral) or isinstance(x, bool):
        raise TypeError(f"{name} must be an integer, got {x!r}")
    x = int(x)
    if minimum is not None and x < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {x}")
    return x


def check_probability_array(X, name="p") -> np.ndarray:
    """1-D float array of probabilities; column vectors are flattened."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    X = np.atleast_1d(X)
    if X.ndim != 1:
        raise ValueError(f"{name} must be 1-D or a single column, got shape {X.shape}")
    if np.any(~np.isfinite(X)) or np.any((X < 0) | (X > 1)):
        raise ValueError(f"{name} values must lie in [0, 1]")
    return X


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    workers = check_int(workers, "workers", minimum=1)
    return workers


def chunked_map(fn, replicates, workers=None):
    """Apply ``fn(chunk)`` to contiguous chunks of ``replicates`` and return the
    results in chunk order, whatever the worker count."""
    workers = resolve_workers(workers)
    replicates = np.asarray(replicates, dtype=np.int64)
    n_chunks = max(1, min(len(replicates), 4 * workers))
    chunks = [c for c in np.array_split(replicates, n_chunks) if c.size]
    if workers == 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def ordered_map(fn, items, workers=None):
    """``map(fn, items)`` over a thread pool, results in input order."""
    workers = resolve_workers(workers)
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
