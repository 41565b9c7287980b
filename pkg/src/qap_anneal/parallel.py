"""Data-parallel annealing engine.

W workers cooperate on one run in barrier-separated phases:

* search: a window of ``chunk_size`` upcoming proposals is split into W
  contiguous slices; every worker evaluates its slice and the earliest
  accepting iteration across all slices wins.  Later hits are discarded and
  re-proposed after the state has changed.
* swap: the pre-swap rows r, s of B' are staged, then rows and columns of B'
  are exchanged by workers owning disjoint column / row ranges.
* update: the delta matrix is cut into contiguous ranges of at least
  ``elems_per_worker`` entries, one per worker.

Because each proposal's temperature and random number are pure functions of
its global iteration index, the result is identical to the sequential
delta-matrix annealer for every worker count.

Two backends implement this: ``"forkjoin"`` compiles the whole loop with
numba ``prange`` regions (each region ends in an implicit barrier), and
``"threads"`` drives a persistent pool of Python threads through
:class:`threading.Barrier`, calling GIL-free kernels, with optional dynamic
checking of the phase access discipline.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass

import numba
import numpy as np

from . import _kernels as K
from .annealer import RunStats, Schedule, _prepare
from .core import (
    DeltaMatrix,
    Instance,
    SolverState,
    SwapSnapshot,
    init_delta_matrix,
    n_pairs,
    pair_arrays,
)
from .errors import (
    ConfigError,
    ConsistencyError,
    ContractViolationError,
    UnsupportedInstanceError,
)

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is often too old and numba warns on every import
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

DEFAULT_ELEMS_PER_WORKER = 16
BACKENDS = ("forkjoin", "threads")


@dataclass(frozen=True)
class ParallelConfig:
    workers: int = 1
    elems_per_worker: int = DEFAULT_ELEMS_PER_WORKER
    chunk_size: int | None = None

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.elems_per_worker < 1:
            raise ConfigError(f"elems_per_worker must be >= 1, got {self.elems_per_worker}")
        if self.chunk_size is not None and self.chunk_size < 1:
            raise ConfigError(f"chunk_size must be >= 1, got {self.chunk_size}")

    @property
    def window(self) -> int:
        """Proposals evaluated per search round (default 16 per worker)."""
        return self.chunk_size if self.chunk_size is not None else self.elems_per_worker * self.workers

    def update_workers(self, n_entries: int) -> int:
        """Workers used for the delta update so each owns at least ``elems_per_worker`` entries."""
        return max(1, min(self.workers, n_entries // self.elems_per_worker))


def partition(total: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous near-equal ``[lo, hi)`` ranges covering ``range(total)``."""
    b = K.partition_bounds(total, parts)
    return [(int(b[w]), int(b[w + 1])) for w in range(parts)]


@dataclass
class ChunkVerdict:
    found: bool
    pair: tuple[int, int] | None
    iteration: int
    accepted_in_chunk_count: int
    start: int
    stop: int


@dataclass
class SearchOutcome:
    """Result of :func:`parallel_search`. ``pair`` is None when the budget ran out."""

    pair: tuple[int, int] | None
    iteration: int
    cursor: int
    consumed: int


class AccessLog:
    """Records which cells each worker touches during a phase and flags conflicts.

    A conflict is two different workers where one writes a cell the other
    reads or writes.  Checking happens on the coordinator after the closing
    barrier, so it never perturbs the phase itself.
    """

    def __init__(self, workers: int):
        self.workers = workers
        self.phases_checked = 0
        self._reset()

    def _reset(self):
        self._acc = [[] for _ in range(self.workers)]

    def read(self, wid: int, name: str, cells):
        self._acc[wid].append((name, False, np.asarray(cells, dtype=np.int64).ravel()))

    def write(self, wid: int, name: str, cells):
        self._acc[wid].append((name, True, np.asarray(cells, dtype=np.int64).ravel()))

    def check(self, phase: str):
        try:
            for w1 in range(self.workers):
                for name, is_write, cells in self._acc[w1]:
                    if not is_write:
                        continue
                    for w2 in range(self.workers):
                        if w2 == w1:
                            continue
                        for name2, _, cells2 in self._acc[w2]:
                            if name2 == name and np.intersect1d(cells, cells2).size:
                                raise ConsistencyError(
                                    f"{phase}: worker {w1} writes {name} cells also "
                                    f"accessed by worker {w2}"
                                )
            self.phases_checked += 1
        finally:
            self._reset()


class WorkerPool:
    """Fixed set of worker threads that run one phase at a time between two barriers.

    Every worker takes part in every barrier, whether or not it has work in
    the phase; the pool size never changes during its lifetime.
    """

    def __init__(self, workers: int, log: AccessLog | None = None):
        self.workers = workers
        self.log = log
        self._barrier = threading.Barrier(workers + 1)
        self._task = None
        self._errors: list[BaseException | None] = [None] * workers
        self._closed = False
        self._threads = [
            threading.Thread(target=self._loop, args=(w,), daemon=True, name=f"qap-worker-{w}")
            for w in range(workers)
        ]
        for t in self._threads:
            t.start()

    def _loop(self, wid: int):
        while True:
            self._barrier.wait()
            task = self._task
            if task is None:
                return
            try:
                task(wid)
            except BaseException as exc:  # re-raised on the coordinator
                self._errors[wid] = exc
            self._barrier.wait()

    def run(self, task, phase: str = "phase"):
        if self._closed:
            raise RuntimeError("worker pool is closed")
        self._task = task
        self._barrier.wait()
        self._barrier.wait()
        self._task = None
        errors = [e for e in self._errors if e is not None]
        self._errors = [None] * self.workers
        if errors:
            raise errors[0]
        if self.log is not None:
            self.log.check(phase)

    def close(self):
        if self._closed:
            return
        self._closed = True
        self._task = None
        self._barrier.wait()
        for t in self._threads:
            t.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _require_current_delta(state: SolverState):
    if not state.delta_current:
        raise ConsistencyError(
            "delta matrix is stale: a swap was applied without the matching update phase"
        )


def search_chunk(
    state: SolverState,
    start: int,
    stop: int,
    schedule: Schedule,
    seed: int,
    pool: WorkerPool,
) -> ChunkVerdict:
    """Evaluate proposals ``start .. stop-1`` on the pool and keep the earliest acceptance."""
    _require_current_delta(state)
    delta = state.delta.entries
    m = delta.shape[0]
    seed64 = np.uint64(seed & ((1 << 64) - 1))
    slices = partition(stop - start, pool.workers)
    firsts = [-1] * pool.workers
    counts = [0] * pool.workers
    log = pool.log

    def task(wid):
        lo, hi = slices[wid]
        if hi > lo:
            firsts[wid], counts[wid] = K.scan_accepting(
                delta, seed64, schedule.t0, schedule.beta, start + lo, start + hi
            )
            if log is not None:
                log.read(wid, "delta", np.arange(start + lo, start + hi) % m)

    pool.run(task, "search")
    hits = [f for f in firsts if f >= 0]
    if not hits:
        return ChunkVerdict(False, None, stop, 0, start, stop)
    k = min(hits)
    c = k % m
    rows, cols = pair_arrays(state.instance.n)
    return ChunkVerdict(True, (int(rows[c]), int(cols[c])), k, sum(counts), start, stop)


def parallel_search(
    state: SolverState,
    start: int,
    schedule: Schedule,
    seed: int,
    config: ParallelConfig,
    stop: int | None = None,
    pool: WorkerPool | None = None,
    check: bool = False,
) -> SearchOutcome:
    """Find the first accepting proposal at or after global iteration ``start``.

    Proposals are examined in windows of ``config.window``; ``stop`` (default:
    the end of the schedule) bounds the iteration budget.  With ``check`` set,
    each winning window is rescanned sequentially to confirm the minimum index.
    """
    stop = schedule.total_iters if stop is None else stop
    m = n_pairs(state.instance.n)
    own = pool is None
    pool = pool or WorkerPool(config.workers)
    try:
        k = start
        while k < stop:
            hi = min(k + config.window, stop)
            verdict = search_chunk(state, k, hi, schedule, seed, pool)
            if check:
                first = K.first_accepting(
                    state.delta.entries, np.uint64(seed & ((1 << 64) - 1)),
                    schedule.t0, schedule.beta, k, hi,
                )
                if first != (verdict.iteration if verdict.found else -1):
                    raise ConsistencyError(
                        f"chunk [{k}, {hi}) returned {verdict.iteration}, sequential rescan {first}"
                    )
            if verdict.found:
                it = verdict.iteration
                return SearchOutcome(verdict.pair, it, (it + 1) % m, it + 1 - start)
            k = hi
        return SearchOutcome(None, stop, stop % m, stop - start)
    finally:
        if own:
            pool.close()


def parallel_apply_swap(state: SolverState, r: int, s: int, pool: WorkerPool) -> SwapSnapshot:
    """Exchange facilities ``r`` and ``s`` with the B' row and column exchanges spread over the pool."""
    snap = state.snapshot(r, s)
    n = state.instance.n
    bp = state.bprime
    ranges = partition(n, pool.workers)
    log = pool.log

    def rows_task(wid):
        lo, hi = ranges[wid]
        K.exchange_rows_range(bp, r, s, snap.bprime_r, snap.bprime_s, lo, hi)
        if log is not None:
            j = np.arange(lo, hi)
            log.write(wid, "bprime", np.concatenate([r * n + j, s * n + j]))

    def cols_task(wid):
        lo, hi = ranges[wid]
        K.exchange_cols_range(bp, r, s, lo, hi)
        if log is not None:
            i = np.arange(lo, hi)
            log.write(wid, "bprime", np.concatenate([i * n + r, i * n + s]))

    state.perm[r], state.perm[s] = state.perm[s], state.perm[r]
    pool.run(rows_task, "swap-rows")
    pool.run(cols_task, "swap-cols")
    state.cost += snap.delta_rs
    state.version += 1
    return snap


def parallel_update_delta(
    state: SolverState,
    r: int,
    s: int,
    snapshot: SwapSnapshot | None,
    config: ParallelConfig,
    pool: WorkerPool | None = None,
):
    """Parallel counterpart of :func:`qap_anneal.core.update_delta_matrix`.

    Only ``config.update_workers(...)`` workers get a range; the rest idle
    through the barrier.
    """
    if snapshot is None:
        raise ContractViolationError("parallel_update_delta needs the pre-swap snapshot")
    if {snapshot.r, snapshot.s} != {r, s}:
        raise ContractViolationError(
            f"snapshot is for ({snapshot.r}, {snapshot.s}), update requested for ({r}, {s})"
        )
    if state.delta is None or state.delta_version != state.version - 1:
        raise ContractViolationError("delta matrix must be updated right after a single swap")
    inst = state.instance
    if not inst.fast_path:
        raise UnsupportedInstanceError("delta updates need a symmetric zero-diagonal instance")
    n = inst.n
    delta = state.delta.entries
    m = delta.shape[0]
    eff = config.update_workers(m)
    ranges = partition(m, eff)
    rows, cols = pair_arrays(n)
    own = pool is None
    pool = pool or WorkerPool(config.workers)
    log = pool.log

    def task(wid):
        if wid >= eff:
            return
        lo, hi = ranges[wid]
        K.update_delta_range(
            inst.a, state.bprime, delta, rows, cols,
            snapshot.r, snapshot.s, snapshot.bprime_r, snapshot.bprime_s, lo, hi,
        )
        if log is not None:
            log.write(wid, "delta", np.arange(lo, hi))

    try:
        pool.run(task, "update")
    finally:
        if own:
            pool.close()
    state.delta_version = state.version
    return state.delta


def _numba_threads(workers: int) -> int:
    return max(1, min(workers, numba.config.NUMBA_NUM_THREADS))


def anneal_parallel(
    instance: Instance,
    iters: int,
    seed: int,
    config: ParallelConfig | None = None,
    t0: float | None = None,
    tf: float | None = None,
    initial_perm=None,
    record: bool = False,
    backend: str = "forkjoin",
    check: bool = False,
    check_every: int = 1000,
) -> RunStats:
    """Parallel delta-matrix annealing; same results as ``anneal(..., mode="delta")``.

    ``check`` (threads backend only) turns on the dynamic access checker, the
    per-chunk sequential rescan and a from-scratch delta comparison every
    ``check_every`` accepted swaps.
    """
    config = config or ParallelConfig()
    if backend not in BACKENDS:
        raise ConfigError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if iters < 1:
        raise ConfigError(f"iters must be at least 1, got {iters}")
    if not instance.fast_path:
        raise UnsupportedInstanceError(
            "parallel annealing needs a symmetric zero-diagonal instance"
        )
    run = _prepare(instance, iters, seed, t0, tf, initial_perm, record)
    started = time.perf_counter()
    run.init_delta()
    if backend == "forkjoin":
        m = run.delta.shape[0]
        prev = numba.get_num_threads()
        numba.set_num_threads(_numba_threads(config.workers))
        try:
            sch = run.schedule
            run.cost, run.best_cost, run.n_acc = K.anneal_forkjoin(
                instance.a, run.bp, run.perm, run.delta, run.rows, run.cols,
                run.cost, run.best_cost, run.best_perm, run.seed, sch.t0, sch.beta,
                0, iters, run.trace, run.n_acc,
                config.workers, config.window, config.update_workers(m),
            )
        finally:
            numba.set_num_threads(prev)
    else:
        _threads_loop(run, seed, config, check, check_every)
    return run.stats(time.perf_counter() - started)


def _threads_loop(run, seed, config, check, check_every):
    inst = run.instance
    state = SolverState(inst, run.perm, run.bp, run.cost)
    state.delta = DeltaMatrix(inst.n, run.delta)
    state.delta_version = state.version
    log = AccessLog(config.workers) if check else None
    with WorkerPool(config.workers, log) as pool:
        k = 0
        while k < run.iters:
            out = parallel_search(state, k, run.schedule, seed, config, run.iters, pool, check)
            if out.pair is None:
                break
            r, s = out.pair
            snap = parallel_apply_swap(state, r, s, pool)
            parallel_update_delta(state, r, s, snap, config, pool)
            if run.trace.shape[0]:
                run.trace[run.n_acc] = out.iteration
            run.n_acc += 1
            if state.cost < run.best_cost:
                run.best_cost = state.cost
                run.best_perm[:] = state.perm
            if check and run.n_acc % check_every == 0:
                if state.delta != init_delta_matrix(state):
                    raise ConsistencyError(
                        f"delta matrix diverged from scratch after {run.n_acc} swaps"
                    )
            k = out.iteration + 1
    run.cost = state.cost


def default_workers() -> int:
    """Worker count from ``QAP_ANNEAL_WORKERS``, else the number of usable CPUs."""
    env = os.environ.get("QAP_ANNEAL_WORKERS")
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ConfigError(f"QAP_ANNEAL_WORKERS must be an integer, got {env!r}") from None
        if w < 1:
            raise ConfigError(f"QAP_ANNEAL_WORKERS must be >= 1, got {w}")
        return w
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1
