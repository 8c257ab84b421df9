"""Compiled inner loops: keyed edge randomness, frontier growth, dual growth.

Everything in here is a pure function of its arguments and releases the GIL,
so replicates can be fanned out over a thread pool without changing results.

Lattice frame used by the growth kernels: a cluster seeded at level ``n0`` by
the interval ``m_lo, m_lo + 2, ..., m_hi`` is stored at depth ``s = n - n0``
in column ``c = (m - m_lo + s) // 2``. The NE edge out of column ``c`` lands in
column ``c + 1`` and the NW edge lands in column ``c``.
"""

import numpy as np
from numba import njit

NE = 0
NW = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_C_M = np.uint64(0xD1B54A32D192ED03)
_C_N = np.uint64(0xAEF17502108EF2D9)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53

STATUS_OK = 0
STATUS_SITE_CAP = 1


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_key(seed, replicate):
    """64-bit key for one replicate's edge stream."""
    z = _mix64(np.uint64(seed) + _GOLDEN)
    return _mix64(z ^ (np.uint64(replicate) * _GOLDEN + _M2))


@njit(inline="always")
def edge_u(key, m, n, d):
    """Uniform in [0, 1) attached to edge ``(m, n) -> (m +/- 1, n + 1)``."""
    z = key ^ (np.uint64(np.int64(m)) * _C_M)
    z = _mix64(z + (np.uint64(np.int64(n)) * _C_N) + np.uint64(d))
    z = _mix64(z ^ key)
    return np.float64(z >> _S11) * _TO_UNIT


@njit(cache=True)
def edge_u_scalar(key, m, n, d):
    return edge_u(key, m, n, d)


@njit(cache=True)
def edge_u_many(key, m, n, d):
    out = np.empty(m.shape[0], np.float64)
    for i in range(m.shape[0]):
        out[i] = edge_u(key, m[i], n[i], d[i])
    return out


@njit(nogil=True, cache=True)
def grow(key, n0, m_lo, m_hi, probs, record, max_sites):
    """Grow the forward cluster of a seed interval through ``len(probs)`` levels.

    ``probs[s]`` is the opening probability of every edge leaving level
    ``n0 + s``. Returns ``(status, counts, left, right, run_ptr, run_lo,
    run_hi)``; per-level arrays have length ``len(probs) + 1`` and hold zeros
    past extinction. Runs (only when ``record``) are inclusive m-ranges with
    step 2, grouped by level through ``run_ptr``.
    """
    K = probs.shape[0]
    w0 = (m_hi - m_lo) // 2 + 1
    width = w0 + K + 2
    cur = np.zeros(width, np.uint8)
    nxt = np.zeros(width, np.uint8)
    counts = np.zeros(K + 1, np.int64)
    left = np.zeros(K + 1, np.int64)
    right = np.zeros(K + 1, np.int64)
    run_ptr = np.zeros(K + 2, np.int64)
    cap = 64
    if record:
        cap = max(64, 4 * w0)
    run_lo = np.empty(cap, np.int64)
    run_hi = np.empty(cap, np.int64)
    n_runs = 0

    for c in range(w0):
        cur[c] = 1
    lo = 0
    hi = w0 - 1
    counts[0] = w0
    left[0] = m_lo
    right[0] = m_hi
    if record:
        run_lo[0] = m_lo
        run_hi[0] = m_hi
        n_runs = 1
    run_ptr[1] = n_runs
    total = w0
    status = STATUS_OK

    for s in range(K):
        p = probs[s]
        n = n0 + s
        base = m_lo - s
        for c in range(lo, hi + 2):
            nxt[c] = 0
        if p > 0.0:
            for c in range(lo, hi + 1):
                if cur[c]:
                    m = base + 2 * c
                    if edge_u(key, m, n, NW) < p:
                        nxt[c] = 1
                    if edge_u(key, m, n, NE) < p:
                        nxt[c + 1] = 1
        nlo = -1
        nhi = -1
        cnt = 0
        nbase = base - 1
        in_run = False
        for c in range(lo, hi + 2):
            if nxt[c]:
                cnt += 1
                if nlo < 0:
                    nlo = c
                nhi = c
                if record and not in_run:
                    if n_runs >= run_lo.shape[0]:
                        grown_lo = np.empty(2 * run_lo.shape[0], np.int64)
                        grown_hi = np.empty(2 * run_lo.shape[0], np.int64)
                        grown_lo[:n_runs] = run_lo[:n_runs]
                        grown_hi[:n_runs] = run_hi[:n_runs]
                        run_lo = grown_lo
                        run_hi = grown_hi
                    run_lo[n_runs] = nbase + 2 * c
                    in_run = True
                if record:
                    run_hi[n_runs] = nbase + 2 * c
            elif in_run:
                n_runs += 1
                in_run = False
        if in_run:
            n_runs += 1
        run_ptr[s + 2] = n_runs
        if cnt == 0:
            for t in range(s + 2, K + 2):
                run_ptr[t] = n_runs
            break
        counts[s + 1] = cnt
        left[s + 1] = nbase + 2 * nlo
        right[s + 1] = nbase + 2 * nhi
        total += cnt
        if max_sites > 0 and total > max_sites:
            status = STATUS_SITE_CAP
            break
        tmp = cur
        cur = nxt
        nxt = tmp
        lo = nlo
        hi = nhi

    return status, counts, left, right, run_ptr, run_lo[:n_runs], run_hi[:n_runs]


@njit(nogil=True, cache=True)
def grow_profile_batch(seed, replicates, n0, m_lo, m_hi, probs):
    """Right/left/count profiles for replicates ``replicates[i]`` (no runs)."""
    R = replicates.shape[0]
    K = probs.shape[0]
    counts = np.zeros((R, K + 1), np.int64)
    left = np.zeros((R, K + 1), np.int64)
    right = np.zeros((R, K + 1), np.int64)
    for i in range(R):
        key = stream_key(seed, replicates[i])
        _, c, lft, rgt, _, _, _ = grow(key, n0, m_lo, m_hi, probs, False, 0)
        counts[i] = c
        left[i] = lft
        right[i] = rgt
    return counts, left, right


@njit(nogil=True, cache=True)
def dual_grow(key, m_w, n_w, probs, base_level, cutoff):
    """Grow the reversed cluster of ``(m_w, n_w)`` downward for ``cutoff`` levels.

    The edge leaving forward level ``L`` opens with ``probs[L - base_level]``.
    Returns ``(depth, origin_hit)``: the deepest level offset reached (``cutoff``
    when it survives) and whether the final set contains ``(0, 0)``.
    """
    cur = np.zeros(cutoff + 2, np.uint8)
    nxt = np.zeros(cutoff + 2, np.uint8)
    cur[0] = 1
    lo = 0
    hi = 0
    depth = 0
    for s in range(cutoff):
        L = n_w - s - 1
        p = probs[L - base_level]
        for q in range(lo, hi + 2):
            nxt[q] = 0
        alive = False
        nlo = -1
        nhi = -1
        if p > 0.0:
            for q in range(lo, hi + 1):
                if cur[q]:
                    m = m_w - s + 2 * q
                    if edge_u(key, m - 1, L, NE) < p:
                        nxt[q] = 1
                    if edge_u(key, m + 1, L, NW) < p:
                        nxt[q + 1] = 1
        for q in range(lo, hi + 2):
            if nxt[q]:
                alive = True
                if nlo < 0:
                    nlo = q
                nhi = q
        if not alive:
            return depth, False
        depth = s + 1
        tmp = cur
        cur = nxt
        nxt = tmp
        lo = nlo
        hi = nhi
    origin_hit = False
    if n_w - cutoff == 0:
        q0 = (0 - m_w + cutoff) // 2
        # entries outside [lo, hi] are stale
        if lo <= q0 <= hi and (0 - m_w + cutoff) % 2 == 0:
            origin_hit = cur[q0] == 1
    return depth, origin_hit


@njit(nogil=True, cache=True)
def dual_depth_batch(seed, replicates, m_w, n_w, probs, base_level, cutoff):
    R = replicates.shape[0]
    depth = np.zeros(R, np.int64)
    hit = np.zeros(R, np.bool_)
    for i in range(R):
        key = stream_key(seed, replicates[i])
        d, h = dual_grow(key, m_w, n_w, probs, base_level, cutoff)
        depth[i] = d
        hit[i] = h
    return depth, hit


@njit(nogil=True, cache=True)
def survives_from(key, m, n0, probs, look):
    """Whether the single-site forward cluster at ``(m, n0)`` lives ``look`` levels."""
    status, counts, _, _, _, _, _ = grow(key, n0, m, m, probs[:look], False, 0)
    return counts[look] > 0


@njit(nogil=True, cache=True)
def break_point_scan(key, right, counts, n_first, n_last, probs, look):
    """Heights ``k`` in ``[n_first, n_last]`` whose rightmost site survives ``look`` levels.

    ``right``/``counts`` are per-level profiles of the base run started at
    level 0 and ``probs[k]`` is the opening probability out of level ``k``.
    """
    out = np.empty(n_last - n_first + 1, np.int64)
    n_out = 0
    for k in range(n_first, n_last + 1):
        if counts[k] == 0:
            break
        if k + look > probs.shape[0]:
            break
        if survives_from(key, right[k], k, probs[k:], look):
            out[n_out] = k
            n_out += 1
    return out[:n_out]
