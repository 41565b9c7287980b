"""Instances, solver state and the delta-matrix bookkeeping.

Facility ``i`` sits at location ``perm[i]``.  The state keeps the permuted
distance matrix ``bprime[i, j] = b[perm[i], perm[j]]`` so that every delta
formula indexes facility space directly, plus a cached swap delta for every
pair ``r < s`` stored as a flat upper triangle in row-major pair order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import (
    ContractViolationError,
    DimensionError,
    InvalidPairError,
    UnsupportedInstanceError,
)


@dataclass(frozen=True, eq=False)
class Instance:
    """A QAP instance with flow matrix ``a`` and distance matrix ``b``.

    The symmetry and zero-diagonal flags are computed from the data, not
    trusted from the caller.
    """

    a: np.ndarray
    b: np.ndarray
    n: int = field(init=False)
    symmetric: bool = field(init=False)
    zero_diagonal: bool = field(init=False)

    def __post_init__(self):
        a = _as_int_matrix(self.a, "a")
        b = _as_int_matrix(self.b, "b")
        if a.shape != b.shape:
            raise DimensionError(f"a is {a.shape} but b is {b.shape}")
        n = a.shape[0]
        if n < 2:
            raise DimensionError(f"instance size must be at least 2, got {n}")
        if (a < 0).any() or (b < 0).any():
            raise ValueError("matrix entries must be non-negative")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "n", n)
        object.__setattr__(
            self, "symmetric", bool((a == a.T).all() and (b == b.T).all())
        )
        object.__setattr__(
            self,
            "zero_diagonal",
            bool(not np.diagonal(a).any() and not np.diagonal(b).any()),
        )

    @property
    def fast_path(self) -> bool:
        """True when the delta-matrix formulas apply."""
        return self.symmetric and self.zero_diagonal

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b)

    def __repr__(self):
        return (
            f"Instance(n={self.n}, symmetric={self.symmetric}, "
            f"zero_diagonal={self.zero_diagonal})"
        )


def _as_int_matrix(m, name: str) -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {arr.shape}")
    if arr.dtype.kind not in "iub":
        if arr.dtype.kind == "f" and np.array_equal(arr, np.round(arr)):
            pass
        else:
            raise ValueError(f"{name} must hold integers, got dtype {arr.dtype}")
    return np.array(arr, dtype=np.int64, copy=True)


def check_perm(perm, n: int) -> np.ndarray:
    """Return ``perm`` as an int64 array after verifying it is a bijection on ``0..n-1``."""
    p = np.asarray(perm)
    if p.ndim != 1 or p.shape[0] != n:
        raise DimensionError(f"permutation of length {p.shape} does not match n={n}")
    p = p.astype(np.int64, copy=True)
    if not np.array_equal(np.sort(p), np.arange(n)):
        raise ValueError(f"not a permutation of 0..{n - 1}: {p.tolist()}")
    return p


def n_pairs(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(r: int, s: int, n: int) -> int:
    """Position of pair ``(r, s)``, ``r < s``, in row-major upper-triangle order."""
    if r > s:
        r, s = s, r
    if r == s or r < 0 or s >= n:
        raise InvalidPairError(f"invalid pair ({r}, {s}) for n={n}")
    return r * n - r * (r + 1) // 2 + (s - r - 1)


def pair_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column index of every pair, in storage order."""
    rows, cols = np.triu_indices(n, 1)
    return rows.astype(np.int64), cols.astype(np.int64)


class DeltaMatrix:
    """Swap deltas for all pairs ``r < s``; ``get(s, r)`` mirrors ``get(r, s)`` and ``get(r, r)`` is 0."""

    __slots__ = ("n", "entries")

    def __init__(self, n: int, entries: np.ndarray | None = None):
        self.n = n
        m = n_pairs(n)
        if entries is None:
            entries = np.zeros(m, dtype=np.int64)
        elif entries.shape != (m,):
            raise DimensionError(f"delta matrix for n={n} needs {m} entries, got {entries.shape}")
        self.entries = entries

    def get(self, r: int, s: int) -> int:
        if r == s:
            return 0
        return int(self.entries[pair_index(r, s, self.n)])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.int64)
        rows, cols = np.triu_indices(self.n, 1)
        out[rows, cols] = self.entries
        out[cols, rows] = self.entries
        return out

    def copy(self) -> DeltaMatrix:
        return DeltaMatrix(self.n, self.entries.copy())

    def __len__(self):
        return self.entries.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DeltaMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.entries, other.entries)


@dataclass
class SwapSnapshot:
    """Pre-swap rows ``r`` and ``s`` of A and B' handed to the delta update."""

    r: int
    s: int
    a_r: np.ndarray
    a_s: np.ndarray
    bprime_r: np.ndarray
    bprime_s: np.ndarray
    delta_rs: int


@dataclass(eq=False)
class SolverState:
    instance: Instance
    perm: np.ndarray
    bprime: np.ndarray
    cost: int
    delta: DeltaMatrix | None = None
    # bumped by every swap; the delta matrix is current iff delta_version == version
    version: int = 0
    delta_version: int = -1

    @classmethod
    def initial(cls, instance: Instance, perm=None, with_delta: bool = False) -> SolverState:
        p = np.arange(instance.n, dtype=np.int64) if perm is None else check_perm(perm, instance.n)
        state = cls(instance, p, bprime_of(instance, p), cost(instance, p))
        if with_delta:
            state.delta = init_delta_matrix(state)
            state.delta_version = state.version
        return state

    @property
    def delta_current(self) -> bool:
        return self.delta is not None and self.delta_version == self.version

    def snapshot(self, r: int, s: int) -> SwapSnapshot:
        _check_pair(r, s, self.instance.n)
        d = self.delta.get(r, s) if self.delta_current else swap_delta_scratch(self, r, s)
        a = self.instance.a
        return SwapSnapshot(
            r, s, a[r].copy(), a[s].copy(), self.bprime[r].copy(), self.bprime[s].copy(), d
        )

    def copy(self) -> SolverState:
        return SolverState(
            self.instance,
            self.perm.copy(),
            self.bprime.copy(),
            self.cost,
            None if self.delta is None else self.delta.copy(),
            self.version,
            self.delta_version,
        )


def _check_pair(r: int, s: int, n: int) -> None:
    if r == s:
        raise InvalidPairError(f"cannot swap facility {r} with itself")
    if not (0 <= r < n and 0 <= s < n):
        raise InvalidPairError(f"pair ({r}, {s}) out of range for n={n}")


def _require_fast_path(instance: Instance) -> None:
    if not instance.fast_path:
        raise UnsupportedInstanceError(
            "delta formulas require a symmetric instance with zero diagonal"
        )


def cost(instance: Instance, perm) -> int:
    """Objective value: sum over i, j of a[i, j] * b[perm[i], perm[j]]."""
    p = check_perm(perm, instance.n)
    return int(K.cost(instance.a, instance.b, p))


def bprime_of(instance: Instance, perm) -> np.ndarray:
    p = check_perm(perm, instance.n)
    return instance.b[np.ix_(p, p)].copy()


def swap_delta_scratch(state: SolverState, r: int, s: int) -> int:
    """Cost change of exchanging facilities ``r`` and ``s``, computed in O(N)."""
    _check_pair(r, s, state.instance.n)
    _require_fast_path(state.instance)
    return int(K.swap_delta(state.instance.a, state.bprime, r, s))


def swap_delta_general(state: SolverState, r: int, s: int) -> int:
    """Like :func:`swap_delta_scratch` but valid for any instance."""
    _check_pair(r, s, state.instance.n)
    return int(K.swap_delta_general(state.instance.a, state.bprime, r, s))


def init_delta_matrix(state: SolverState) -> DeltaMatrix:
    _require_fast_path(state.instance)
    n = state.instance.n
    rows, cols = pair_arrays(n)
    dm = DeltaMatrix(n)
    K.init_delta(state.instance.a, state.bprime, rows, cols, dm.entries)
    return dm


def apply_swap(state: SolverState, r: int, s: int) -> SwapSnapshot:
    """Exchange facilities ``r`` and ``s`` in place and return the pre-swap snapshot.

    The cost is advanced by the pre-swap delta. The delta matrix, if any, is
    left stale until :func:`update_delta_matrix` is called with the snapshot.
    """
    snap = state.snapshot(r, s)
    K.swap_rows_cols(state.perm, state.bprime, r, s)
    state.cost += snap.delta_rs
    state.version += 1
    return snap


def update_delta_matrix(state: SolverState, r: int, s: int, snapshot: SwapSnapshot | None) -> DeltaMatrix:
    if snapshot is None:
        raise ContractViolationError("update_delta_matrix needs the pre-swap snapshot")
    if {snapshot.r, snapshot.s} != {r, s}:
        raise ContractViolationError(
            f"snapshot is for ({snapshot.r}, {snapshot.s}), update requested for ({r}, {s})"
        )
    if state.delta is None:
        raise ContractViolationError("state has no delta matrix to update")
    if state.delta_version != state.version - 1:
        raise ContractViolationError("delta matrix must be updated right after a single swap")
    _require_fast_path(state.instance)
    rows, cols = pair_arrays(state.instance.n)
    K.update_delta_range(
        state.instance.a, state.bprime, state.delta.entries, rows, cols,
        snapshot.r, snapshot.s, snapshot.bprime_r, snapshot.bprime_s, 0, len(state.delta),
    )
    state.delta_version = state.version
    return state.delta
