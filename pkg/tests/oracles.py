"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here calls into the compiled kernels.
"""

import itertools
import math

import numpy as np

from qap_anneal.rng import uniform_py


def cost(a, b, p):
    n = len(p)
    return sum(int(a[i][j]) * int(b[p[i]][p[j]]) for i in range(n) for j in range(n))


def swapped(p, r, s):
    q = list(p)
    q[r], q[s] = q[s], q[r]
    return q


def swap_delta(a, b, p, r, s):
    return cost(a, b, swapped(p, r, s)) - cost(a, b, p)


def cost_np(a, b, p):
    p = np.asarray(p)
    return int((a * b[np.ix_(p, p)]).sum())


def all_swap_deltas_np(a, b, p):
    """Cost difference for every pair r < s, row-major, by full re-evaluation."""
    n = len(p)
    base = cost_np(a, b, p)
    out = []
    for r in range(n):
        for s in range(r + 1, n):
            out.append(cost_np(a, b, swapped(p, r, s)) - base)
    return np.array(out, dtype=np.int64)


def random_symmetric(rng, n, high=100, low=1):
    m = np.triu(rng.integers(low, high + 1, (n, n)), 1)
    return m + m.T


def brute_force_optimum(a, b):
    n = a.shape[0]
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    # cost of every permutation at once: sum_ij a_ij * b[p_i, p_j]
    total = np.zeros(len(perms), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if a[i, j]:
                total += a[i, j] * b[perms[:, i], perms[:, j]]
    return int(total.min())


def pairs(n):
    return [(r, s) for r in range(n) for s in range(r + 1, n)]


def reference_anneal(a, b, p, iters, seed, t0, tf):
    """Literal sequential SA: cyclic pair order, delta by full re-evaluation, pure-Python RNG.

    Returns (accepted iteration list, final perm, final cost, best cost).
    """
    n = len(p)
    order = pairs(n)
    beta = (t0 - tf) / ((iters - 1) * t0 * tf) if iters > 1 else 0.0
    p = list(p)
    c = cost(a, b, p)
    best = c
    accepted = []
    for k in range(iters):
        r, s = order[k % len(order)]
        d = swap_delta(a, b, p, r, s)
        temp = t0 / (1.0 + k * beta * t0)
        if d < 0 or math.exp(-d / temp) > uniform_py(seed, k):
            p = swapped(p, r, s)
            c += d
            best = min(best, c)
            accepted.append(k)
    return accepted, p, c, best
