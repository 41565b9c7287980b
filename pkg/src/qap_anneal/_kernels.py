"""Compiled inner loops.

Everything here works on plain int64 arrays so the same kernels serve the
sequential annealer, the fork-join engine and the thread-pool workers.  ``bp``
is always the permuted distance matrix B'[i, j] = B[p[i], p[j]].
"""

import math

import numba as nb
import numpy as np

from .rng import stream_key, uniform_keyed


@nb.njit(inline="always", cache=True)
def temperature(t0, beta, k):
    return t0 / (1.0 + k * beta * t0)


# exp(-37) < 2**-53, the smallest nonzero draw, so beyond this only r == 0 can pass
_EXP_CUTOFF = 37.0


@nb.njit(inline="always", cache=True)
def accepts(delta, temp, r):
    if delta < 0:
        return True
    x = delta / temp
    if x > _EXP_CUTOFF and r > 0.0:
        return False
    return math.exp(-x) > r


@nb.njit(inline="always", cache=True)
def accepts_at(delta, t0, beta, key, k):
    """Metropolis test for iteration ``k``; the random draw is only made when needed."""
    if delta < 0:
        return True
    return accepts(delta, temperature(t0, beta, k), uniform_keyed(key, k))


@nb.njit(cache=True)
def cost(a, b, perm):
    n = a.shape[0]
    total = 0
    for i in range(n):
        pi = perm[i]
        for j in range(n):
            total += a[i, j] * b[pi, perm[j]]
    return total


@nb.njit(nogil=True, cache=True)
def swap_delta(a, bp, r, s):
    # symmetric, zero-diagonal instances only
    n = a.shape[0]
    ar = a[r]
    as_ = a[s]
    br = bp[r]
    bs = bp[s]
    acc = 0
    for k in range(n):
        acc += (ar[k] - as_[k]) * (bs[k] - br[k])
    # k == r and k == s contribute (a_rr - a_sr)(b_sr - b_rr) + (a_rs - a_ss)(b_ss - b_rs)
    acc -= (ar[r] - as_[r]) * (bs[r] - br[r]) + (ar[s] - as_[s]) * (bs[s] - br[s])
    return 2 * acc


@nb.njit(nogil=True, cache=True)
def swap_delta_general(a, bp, r, s):
    """O(N) swap delta valid for arbitrary (asymmetric, nonzero diagonal) matrices."""
    n = a.shape[0]
    acc = 0
    for k in range(n):
        if k == r or k == s:
            continue
        acc += (a[k, r] - a[k, s]) * (bp[k, s] - bp[k, r])
        acc += (a[r, k] - a[s, k]) * (bp[s, k] - bp[r, k])
    acc += (a[r, r] - a[s, s]) * (bp[s, s] - bp[r, r])
    acc += (a[r, s] - a[s, r]) * (bp[s, r] - bp[r, s])
    return acc


@nb.njit(cache=True)
def init_delta(a, bp, rows, cols, out):
    for k in range(rows.shape[0]):
        out[k] = swap_delta(a, bp, rows[k], cols[k])


@nb.njit(nogil=True, cache=True)
def swap_rows_cols(perm, bp, r, s):
    n = bp.shape[0]
    t = perm[r]
    perm[r] = perm[s]
    perm[s] = t
    for j in range(n):
        t = bp[r, j]
        bp[r, j] = bp[s, j]
        bp[s, j] = t
    for i in range(n):
        t = bp[i, r]
        bp[i, r] = bp[i, s]
        bp[i, s] = t


@nb.njit(nogil=True, cache=True)
def update_delta_range(a, bp, delta, rows, cols, r, s, bpre_r, bpre_s, lo, hi):
    """Refresh entries ``lo .. hi-1`` of the delta matrix after swapping ``r, s``.

    ``bp`` is the post-swap matrix, ``bpre_r``/``bpre_s`` the pre-swap rows.
    Pairs disjoint from {r, s} get the O(1) correction
    2 (x_u - x_v)(y_u - y_v) with x = a[r] - a[s] and y = bpre_r - bpre_s;
    pairs touching r or s are recomputed in O(N) from the post-swap state.
    """
    n = a.shape[0]
    x = np.empty(n, dtype=a.dtype)
    y = np.empty(n, dtype=bp.dtype)
    for j in range(n):
        x[j] = a[r, j] - a[s, j]
        y[j] = bpre_r[j] - bpre_s[j]
    k = lo
    while k < hi:
        u = rows[k]
        # entries k .. row_end-1 share row u, with v running consecutively
        row_end = min(hi, k + (n - 1 - cols[k]) + 1)
        v0 = cols[k] - k
        if u == r or u == s:
            for kk in range(k, row_end):
                delta[kk] = swap_delta(a, bp, u, v0 + kk)
        else:
            xu = x[u]
            yu = y[u]
            # branch-free runs between the (at most two) columns r and s
            seg = k
            for v in (min(r, s), max(r, s)):
                kv = v - v0
                if seg <= kv < row_end:
                    _correct_run(delta, x, y, xu, yu, v0, seg, kv)
                    delta[kv] = swap_delta(a, bp, u, v)
                    seg = kv + 1
            _correct_run(delta, x, y, xu, yu, v0, seg, row_end)
        k = row_end


@nb.njit(inline="always", nogil=True, cache=True)
def _correct_run(delta, x, y, xu, yu, v0, lo, hi):
    for kk in range(lo, hi):
        v = v0 + kk
        delta[kk] += 2 * (xu - x[v]) * (yu - y[v])


@nb.njit(nogil=True, cache=True)
def first_accepting(delta, seed, t0, beta, start, stop):
    """Smallest iteration in ``[start, stop)`` whose proposal passes the Metropolis test, else -1."""
    m = delta.shape[0]
    key = stream_key(seed)
    c = start % m
    for k in range(start, stop):
        if accepts_at(delta[c], t0, beta, key, k):
            return k
        c += 1
        if c == m:
            c = 0
    return -1


@nb.njit(inline="always", cache=True)
def _note_accept(k, cost, best_cost, perm, best_perm, trace, n_acc):
    if trace.shape[0] > 0:
        trace[n_acc] = k
    if cost < best_cost:
        best_perm[:] = perm
        return cost
    return best_cost


@nb.njit(cache=True)
def anneal_delta(a, bp, perm, delta, rows, cols, cost, best_cost, best_perm,
                 seed, t0, beta, k_start, k_end, trace, n_acc):
    """Delta-matrix loop over iterations ``k_start .. k_end-1``.

    Mutates perm, bp, delta, best_perm (and trace when it is non-empty).
    Returns ``(cost, best_cost, n_acc)``.
    """
    n = a.shape[0]
    m = delta.shape[0]
    bpre_r = np.empty(n, dtype=bp.dtype)
    bpre_s = np.empty(n, dtype=bp.dtype)
    key = stream_key(seed)
    c = k_start % m
    for k in range(k_start, k_end):
        d = delta[c]
        if accepts_at(d, t0, beta, key, k):
            r = rows[c]
            s = cols[c]
            bpre_r[:] = bp[r]
            bpre_s[:] = bp[s]
            swap_rows_cols(perm, bp, r, s)
            update_delta_range(a, bp, delta, rows, cols, r, s, bpre_r, bpre_s, 0, m)
            cost += d
            best_cost = _note_accept(k, cost, best_cost, perm, best_perm, trace, n_acc)
            n_acc += 1
        c += 1
        if c == m:
            c = 0
    return cost, best_cost, n_acc


@nb.njit(cache=True)
def anneal_scratch(a, bp, perm, rows, cols, general, cost, best_cost, best_perm,
                   seed, t0, beta, k_start, k_end, trace, n_acc, window, threshold):
    """Scratch-evaluation loop.

    With ``window > 0`` the loop stops early at the first iteration
    ``k >= window`` whose trailing ``window``-iteration acceptance rate is below
    ``threshold``; the caller then switches to the delta-matrix loop.
    Returns ``(cost, best_cost, n_acc, k_stop)``.
    """
    m = rows.shape[0]
    ring = np.zeros(max(window, 1), dtype=np.uint8)
    recent = 0
    key = stream_key(seed)
    c = k_start % m
    for k in range(k_start, k_end):
        if window > 0 and k >= window:
            if recent < threshold * window:
                return cost, best_cost, n_acc, k
        r = rows[c]
        s = cols[c]
        if general:
            d = swap_delta_general(a, bp, r, s)
        else:
            d = swap_delta(a, bp, r, s)
        hit = accepts_at(d, t0, beta, key, k)
        if hit:
            swap_rows_cols(perm, bp, r, s)
            cost += d
            best_cost = _note_accept(k, cost, best_cost, perm, best_perm, trace, n_acc)
            n_acc += 1
        if window > 0:
            slot = k % window
            recent += np.int64(hit) - np.int64(ring[slot])
            ring[slot] = hit
        c += 1
        if c == m:
            c = 0
    return cost, best_cost, n_acc, k_end


@nb.njit(cache=True)
def partition_bounds(total, parts):
    """Contiguous near-equal split of ``range(total)`` into ``parts`` ranges."""
    bounds = np.empty(parts + 1, dtype=np.int64)
    base = total // parts
    extra = total % parts
    bounds[0] = 0
    for w in range(parts):
        bounds[w + 1] = bounds[w] + base + (1 if w < extra else 0)
    return bounds


@nb.njit(parallel=True, cache=True)
def anneal_forkjoin(a, bp, perm, delta, rows, cols, cost, best_cost, best_perm,
                    seed, t0, beta, k_start, k_end, trace, n_acc,
                    search_workers, chunk_size, update_workers):
    """Fork-join delta-matrix loop; each ``prange`` region ends in an implicit barrier.

    Phases per accepted swap: chunked search (``search_workers`` contiguous
    slices of a ``chunk_size`` window, earliest hit wins), snapshot + B' row
    exchange + column exchange (N-way each), and the delta update split into
    ``update_workers`` contiguous ranges.
    """
    n = a.shape[0]
    m = delta.shape[0]
    bpre_r = np.empty(n, dtype=bp.dtype)
    bpre_s = np.empty(n, dtype=bp.dtype)
    hits = np.empty(search_workers, dtype=np.int64)
    ubounds = partition_bounds(m, update_workers)
    k = k_start
    while k < k_end:
        stop = min(k + chunk_size, k_end)
        sbounds = partition_bounds(stop - k, search_workers)
        for w in nb.prange(search_workers):
            lo = k + sbounds[w]
            hi = k + sbounds[w + 1]
            hits[w] = first_accepting(delta, seed, t0, beta, lo, hi) if hi > lo else -1
        found = -1
        for w in range(search_workers):
            if hits[w] >= 0:
                found = hits[w]
                break
        if found < 0:
            k = stop
            continue
        c = found % m
        r = rows[c]
        s = cols[c]
        d = delta[c]
        for j in nb.prange(n):
            bpre_r[j] = bp[r, j]
            bpre_s[j] = bp[s, j]
        t = perm[r]
        perm[r] = perm[s]
        perm[s] = t
        for j in nb.prange(n):
            bp[r, j] = bpre_s[j]
            bp[s, j] = bpre_r[j]
        for i in nb.prange(n):
            x = bp[i, r]
            bp[i, r] = bp[i, s]
            bp[i, s] = x
        for w in nb.prange(update_workers):
            update_delta_range(a, bp, delta, rows, cols, r, s, bpre_r, bpre_s,
                               ubounds[w], ubounds[w + 1])
        cost += d
        best_cost = _note_accept(found, cost, best_cost, perm, best_perm, trace, n_acc)
        n_acc += 1
        k = found + 1
    return cost, best_cost, n_acc


@nb.njit(nogil=True, cache=True)
def scan_accepting(delta, seed, t0, beta, start, stop):
    """Evaluate every proposal in ``[start, stop)``; return ``(first accepting k or -1, count)``."""
    m = delta.shape[0]
    key = stream_key(seed)
    c = start % m
    first = -1
    count = 0
    for k in range(start, stop):
        if accepts_at(delta[c], t0, beta, key, k):
            if first < 0:
                first = k
            count += 1
        c += 1
        if c == m:
            c = 0
    return first, count


@nb.njit(nogil=True, cache=True)
def exchange_rows_range(bp, r, s, bpre_r, bpre_s, lo, hi):
    for j in range(lo, hi):
        bp[r, j] = bpre_s[j]
        bp[s, j] = bpre_r[j]


@nb.njit(nogil=True, cache=True)
def exchange_cols_range(bp, r, s, lo, hi):
    for i in range(lo, hi):
        t = bp[i, r]
        bp[i, r] = bp[i, s]
        bp[i, s] = t
