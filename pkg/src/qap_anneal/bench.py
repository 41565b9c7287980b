"""Runtime-versus-iterations experiment grid.

Each cell is one (instance size, iteration count, engine, seed) run.  Rows are
written as soon as a cell finishes so an interrupted grid keeps everything
completed so far.  Speedup rows divide the mean reference time by the mean
parallel time over the seeds of each (n, iters, workers) group.
"""

from __future__ import annotations

import csv
import multiprocessing
import statistics
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from typing import Iterable, TextIO

from .annealer import anneal
from .core import Instance
from .instance_io import GeneratorSpec, generate_taixxa
from .parallel import ParallelConfig, anneal_parallel

BENCH_MODES = ("scratch", "delta-seq", "delta-par")
REFERENCE_MODES = ("scratch", "delta-seq")


@dataclass
class BenchRow:
    n: int
    iters: int
    mode: str
    workers: int
    wall_time_s: float
    best_cost: int
    acceptance_rate: float
    seed: int


@dataclass
class SpeedupRow:
    n: int
    iters: int
    reference: str
    workers: int
    t_reference_s: float
    t_parallel_s: float
    speedup: float


CSV_HEADER = [f.name for f in fields(BenchRow)]
SPEEDUP_HEADER = [f.name for f in fields(SpeedupRow)]


def solve(instance: Instance, iters: int, seed: int, mode: str, workers: int = 1, **kw):
    """Dispatch one run to the engine behind a bench/CLI mode name."""
    if mode == "scratch":
        return anneal(instance, iters, seed, mode="scratch", **kw)
    if mode in ("delta", "delta-seq"):
        return anneal(instance, iters, seed, mode="delta", **kw)
    if mode == "auto":
        return anneal(instance, iters, seed, mode="auto", **kw)
    if mode == "delta-par":
        backend = kw.pop("backend", "forkjoin")
        return anneal_parallel(instance, iters, seed, ParallelConfig(workers), backend=backend, **kw)
    raise ValueError(f"unknown mode {mode!r}")


_warm = False


def warmup() -> None:
    """Compile (or load from cache) every engine once so timings exclude JIT cost."""
    global _warm
    if _warm:
        return
    tiny = generate_taixxa(GeneratorSpec(4, 0))
    for mode in ("scratch", "delta-seq", "auto", "delta-par"):
        solve(tiny, 8, 0, mode, 2)
    _warm = True


def _run_cell(cell) -> BenchRow:
    spec, iters, mode, workers, seed = cell
    warmup()
    instance = generate_taixxa(spec)
    stats = solve(instance, iters, seed, mode, workers)
    return BenchRow(
        n=instance.n,
        iters=iters,
        mode=mode,
        workers=workers if mode == "delta-par" else 1,
        wall_time_s=stats.wall_time,
        best_cost=stats.best_cost,
        acceptance_rate=stats.acceptance_rate,
        seed=seed,
    )


def grid_cells(sizes, iters_grid, modes, seeds, instance_seed=0, max_value=100):
    """Cells in output order; ``modes`` holds ``(mode, workers)`` pairs."""
    return [
        (GeneratorSpec(n, instance_seed, max_value), iters, mode, workers, seed)
        for n in sizes
        for iters in iters_grid
        for mode, workers in modes
        for seed in seeds
    ]


def speedups(rows: Iterable[BenchRow], reference: str = "delta-seq") -> list[SpeedupRow]:
    if reference not in REFERENCE_MODES:
        raise ValueError(f"reference must be one of {REFERENCE_MODES}, got {reference!r}")
    ref = defaultdict(list)
    par = defaultdict(list)
    for row in rows:
        if row.mode == reference:
            ref[(row.n, row.iters)].append(row.wall_time_s)
        elif row.mode == "delta-par":
            par[(row.n, row.iters, row.workers)].append(row.wall_time_s)
    out = []
    for (n, iters, workers), times in par.items():
        if (n, iters) not in ref:
            continue
        t_ref = statistics.fmean(ref[(n, iters)])
        t_par = statistics.fmean(times)
        out.append(SpeedupRow(n, iters, reference, workers, t_ref, t_par, t_ref / t_par))
    return out


def run_bench(
    sizes,
    iters_grid,
    modes,
    seeds,
    out: TextIO,
    reference: str = "delta-seq",
    instance_seed: int = 0,
    max_value: int = 100,
    jobs: int = 1,
    speedup_out: TextIO | None = None,
) -> tuple[list[BenchRow], list[SpeedupRow]]:
    """Run the grid, streaming data rows to ``out`` and speedup rows to ``speedup_out``."""
    cells = grid_cells(sizes, iters_grid, modes, seeds, instance_seed, max_value)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    out.flush()
    rows = []
    if jobs > 1:
        # fork is unsafe once the OpenMP runtime behind numba is initialised
        with ProcessPoolExecutor(jobs, mp_context=multiprocessing.get_context("spawn")) as pool:
            results = pool.map(_run_cell, cells)
            for row in results:
                _emit(writer, out, row, rows)
    else:
        for cell in cells:
            _emit(writer, out, _run_cell(cell), rows)
    ups = speedups(rows, reference)
    if speedup_out is not None:
        write_speedups(ups, speedup_out)
    return rows, ups


def write_speedups(ups: Iterable[SpeedupRow], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SPEEDUP_HEADER)
    for up in ups:
        writer.writerow(_fmt(astuple(up)))
    stream.flush()


def _fmt(values):
    return [repr(v) if isinstance(v, float) else v for v in values]


def _emit(writer, out, row, rows):
    writer.writerow(_fmt(astuple(row)))
    out.flush()
    rows.append(row)
