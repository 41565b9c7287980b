"""Sequential simulated annealing over the pairwise-swap neighbourhood.

Iteration ``k`` always proposes pair number ``k mod N(N-1)/2`` of the
row-major upper triangle and draws its Metropolis number from
``RandomStream(seed)(k)``; temperature is a closed-form function of ``k``.
Because nothing depends on hidden generator state, the scratch, delta and
parallel engines all walk the same trajectory.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import Instance, SolverState, check_perm, init_delta_matrix, n_pairs, pair_arrays
from .errors import ConfigError, ScheduleError, UnsupportedInstanceError
from .rng import RandomStream

MODES = ("scratch", "delta", "auto")

#: auto mode switches to the delta matrix once the trailing acceptance rate
#: over this many iterations falls below AUTO_THRESHOLD
AUTO_WINDOW = 10_000
AUTO_THRESHOLD = 0.1

TEMPERATURE_SAMPLE = 1000


@dataclass(frozen=True)
class Schedule:
    """Inverse-linear cooling from ``t0`` at k=0 down to ``tf`` at k=total_iters-1."""

    t0: float
    tf: float
    total_iters: int
    beta: float = field(init=False)

    def __post_init__(self):
        if not (self.tf > 0 and self.t0 >= self.tf):
            raise ScheduleError(f"need t0 >= tf > 0, got t0={self.t0}, tf={self.tf}")
        if self.total_iters < 1:
            raise ScheduleError(f"total_iters must be positive, got {self.total_iters}")
        if self.total_iters > 1:
            beta = (self.t0 - self.tf) / ((self.total_iters - 1) * self.t0 * self.tf)
        else:
            beta = 0.0
        object.__setattr__(self, "beta", beta)


def temperature_at(schedule: Schedule, k: int) -> float:
    if not 0 <= k < schedule.total_iters:
        raise IndexError(f"iteration {k} outside 0..{schedule.total_iters - 1}")
    return schedule.t0 / (1.0 + k * schedule.beta * schedule.t0)


def accept(delta: int, temperature: float, r: float) -> bool:
    """Metropolis test: improvements always pass, otherwise ``exp(-delta/T) > r``."""
    if not temperature > 0:
        raise ScheduleError(f"temperature must be positive, got {temperature}")
    if delta < 0:
        return True
    return math.exp(-delta / temperature) > r


def next_candidate(cursor: int, n: int) -> tuple[int, int, int]:
    """Pair at ``cursor`` in row-major upper-triangle order and the cyclic successor cursor."""
    m = n_pairs(n)
    cursor %= m
    # invert cursor = r*n - r*(r+1)/2 + (s - r - 1)
    r = 0
    row_len = n - 1
    c = cursor
    while c >= row_len:
        c -= row_len
        r += 1
        row_len -= 1
    return r, r + 1 + c, (cursor + 1) % m


@dataclass
class RunStats:
    iterations: int
    accepted: int
    acceptance_rate: float
    best_cost: int
    final_cost: int
    best_perm: np.ndarray
    wall_time: float
    final_perm: np.ndarray | None = None
    t0: float = 0.0
    tf: float = 0.0
    #: iteration index of every accepted swap, when recording was requested
    accepted_iters: np.ndarray | None = None
    #: iteration at which auto mode switched to the delta matrix (None if it never did)
    switched_at: int | None = None

    def same_run(self, other: RunStats) -> bool:
        """Equality on everything except wall time."""
        def eq(x, y):
            if x is None or y is None:
                return x is y
            return np.array_equal(x, y)

        return (
            self.iterations == other.iterations
            and self.accepted == other.accepted
            and self.acceptance_rate == other.acceptance_rate
            and self.best_cost == other.best_cost
            and self.final_cost == other.final_cost
            and np.array_equal(self.best_perm, other.best_perm)
            and eq(self.final_perm, other.final_perm)
            and self.t0 == other.t0
            and self.tf == other.tf
            and eq(self.accepted_iters, other.accepted_iters)
        )


def initial_permutation(n: int, seed: int) -> np.ndarray:
    """Fisher-Yates shuffle of the identity drawing from stream indices ``-n .. -2``."""
    stream = RandomStream(seed)
    perm = np.arange(n, dtype=np.int64)
    u = stream.uniform(-np.arange(n, 1, -1, dtype=np.int64))  # index -(i+1) for i = n-1 .. 1
    for step, i in enumerate(range(n - 1, 0, -1)):
        j = min(int(u[step] * (i + 1)), i)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def init_temperature(instance: Instance, perm, stream: RandomStream) -> tuple[float, float]:
    """Temperature bounds from a sample of swap deltas at ``perm``.

    Samples ``min(1000, N(N-1)/2)`` distinct pairs (partial shuffle driven by
    stream indices below ``-N``). ``tf`` is the smallest nonzero ``|delta|`` and
    ``t0 = tf + (max|delta| - tf) / 10``.
    """
    n = instance.n
    m = n_pairs(n)
    k = min(TEMPERATURE_SAMPLE, m)
    p = check_perm(perm, n)
    state = SolverState(instance, p, instance.b[np.ix_(p, p)], 0)
    rows, cols = pair_arrays(n)
    if k == m:
        chosen = np.arange(m)
    else:
        pool = np.arange(m)
        u = stream.uniform(-n - 1 - np.arange(k, dtype=np.int64))
        for i in range(k):
            j = i + min(int(u[i] * (m - i)), m - i - 1)
            pool[i], pool[j] = pool[j], pool[i]
        chosen = pool[:k]
    kernel = K.swap_delta if instance.fast_path else K.swap_delta_general
    mags = np.array(
        [abs(int(kernel(instance.a, state.bprime, rows[c], cols[c]))) for c in chosen]
    )
    nonzero = mags[mags > 0]
    if nonzero.size == 0:
        return 1.0, 0.1
    dmin = float(nonzero.min())
    dmax = float(mags.max())
    return dmin + (dmax - dmin) / 10.0, dmin


def anneal(
    instance: Instance,
    iters: int,
    seed: int,
    mode: str = "delta",
    t0: float | None = None,
    tf: float | None = None,
    initial_perm=None,
    record: bool = False,
    auto_window: int = AUTO_WINDOW,
    auto_threshold: float = AUTO_THRESHOLD,
) -> RunStats:
    """Run ``iters`` proposed swaps of simulated annealing.

    ``mode`` selects how each proposal's delta is obtained: ``"scratch"``
    recomputes it in O(N), ``"delta"`` looks it up in the maintained delta
    matrix, ``"auto"`` starts in scratch mode and switches once the trailing
    acceptance rate gets low. All three produce the same trajectory.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
    if iters < 1:
        raise ConfigError(f"iters must be at least 1, got {iters}")
    if mode != "scratch" and not instance.fast_path:
        raise UnsupportedInstanceError(
            f"mode {mode!r} needs a symmetric zero-diagonal instance; use mode='scratch'"
        )
    run = _prepare(instance, iters, seed, t0, tf, initial_perm, record)
    started = time.perf_counter()
    switched = None
    if mode == "delta":
        run.init_delta()
        run.run_delta(0, iters)
    else:
        window = auto_window if mode == "auto" else 0
        k_stop = run.run_scratch(0, iters, window, auto_threshold)
        if k_stop < iters:
            switched = k_stop
            run.init_delta()
            run.run_delta(k_stop, iters)
    stats = run.stats(time.perf_counter() - started)
    stats.switched_at = switched
    return stats


class _Run:
    """Mutable arrays of one annealing run, shared by the sequential and parallel drivers."""

    def __init__(self, instance, iters, seed, schedule, perm, record):
        self.instance = instance
        self.iters = iters
        self.seed = np.uint64(seed & ((1 << 64) - 1))
        self.schedule = schedule
        self.perm = perm
        self.bp = instance.b[np.ix_(perm, perm)].copy()
        self.rows, self.cols = pair_arrays(instance.n)
        self.cost = int(K.cost(instance.a, instance.b, perm))
        self.best_cost = self.cost
        self.best_perm = perm.copy()
        self.delta = None
        self.trace = np.empty(iters if record else 0, dtype=np.int64)
        self.n_acc = 0

    def init_delta(self):
        self.delta = np.empty(self.rows.shape[0], dtype=np.int64)
        K.init_delta(self.instance.a, self.bp, self.rows, self.cols, self.delta)

    def _args(self):
        sch = self.schedule
        return (self.best_cost, self.best_perm, self.seed, sch.t0, sch.beta)

    def run_delta(self, k_start, k_end):
        self.cost, self.best_cost, self.n_acc = K.anneal_delta(
            self.instance.a, self.bp, self.perm, self.delta, self.rows, self.cols,
            self.cost, *self._args(), k_start, k_end, self.trace, self.n_acc,
        )

    def run_scratch(self, k_start, k_end, window, threshold):
        general = not self.instance.fast_path
        self.cost, self.best_cost, self.n_acc, k_stop = K.anneal_scratch(
            self.instance.a, self.bp, self.perm, self.rows, self.cols, general,
            self.cost, *self._args(), k_start, k_end, self.trace, self.n_acc,
            window, threshold,
        )
        return k_stop

    def stats(self, wall: float) -> RunStats:
        return RunStats(
            iterations=self.iters,
            accepted=self.n_acc,
            acceptance_rate=self.n_acc / self.iters,
            best_cost=int(self.best_cost),
            final_cost=int(self.cost),
            best_perm=self.best_perm.copy(),
            wall_time=wall,
            final_perm=self.perm.copy(),
            t0=self.schedule.t0,
            tf=self.schedule.tf,
            accepted_iters=self.trace[: self.n_acc].copy() if self.trace.shape[0] else None,
        )


def _prepare(instance, iters, seed, t0, tf, initial_perm, record) -> _Run:
    perm = (
        initial_permutation(instance.n, seed)
        if initial_perm is None
        else check_perm(initial_perm, instance.n)
    )
    if t0 is None or tf is None:
        auto_t0, auto_tf = init_temperature(instance, perm, RandomStream(seed))
        t0 = auto_t0 if t0 is None else t0
        tf = auto_tf if tf is None else tf
    schedule = Schedule(float(t0), float(tf), iters)
    return _Run(instance, iters, seed, schedule, perm, record)
