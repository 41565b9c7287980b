"""Simulated annealing for the quadratic assignment problem with delta-matrix
evaluation and a trace-exact data-parallel engine."""

from .annealer import (
    RunStats,
    Schedule,
    accept,
    anneal,
    init_temperature,
    initial_permutation,
    next_candidate,
    temperature_at,
)
from .core import (
    DeltaMatrix,
    Instance,
    SolverState,
    SwapSnapshot,
    apply_swap,
    bprime_of,
    cost,
    init_delta_matrix,
    swap_delta_general,
    swap_delta_scratch,
    update_delta_matrix,
)
from .errors import *  # noqa: F401,F403
from .instance_io import GeneratorSpec, generate_taixxa, parse_qaplib, read_qaplib, write_qaplib
from .parallel import (
    ChunkVerdict,
    ParallelConfig,
    anneal_parallel,
    parallel_search,
    parallel_update_delta,
)
from .rng import RandomStream

__version__ = "0.1.0"
