"""Stateless counter-based uniform stream.

A draw is a pure function of ``(seed, index)``: the seed is hashed once with
the SplitMix64 finalizer, the index is spread with the golden-ratio increment
and the sum is finalized again.  The top 53 bits give a double in ``[0, 1)``.
Any proposal's random number can therefore be computed out of order, which is
what lets the parallel engine reproduce the sequential trace exactly.

Indices are signed 64-bit integers; negative indices are reserved for set-up
draws (initial shuffle, temperature sampling) so they never collide with the
iteration range ``0 .. I-1``.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def _mix_py(z: int) -> int:
    z = (z ^ (z >> 30)) * _M1 & _MASK
    z = (z ^ (z >> 27)) * _M2 & _MASK
    return z ^ (z >> 31)


def uniform_py(seed: int, index: int) -> float:
    key = _mix_py(seed & _MASK)
    z = _mix_py((key + ((index + 1) & _MASK) * _GOLDEN) & _MASK)
    return (z >> 11) * _INV_2_53


@nb.njit(inline="always", cache=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always", cache=True)
def stream_key(seed):
    """Hash of the seed; hoist out of hot loops and pass to :func:`uniform_keyed`."""
    return _mix(np.uint64(seed))


@nb.njit(inline="always", cache=True)
def uniform_keyed(key, index):
    z = _mix(key + np.uint64(index + 1) * np.uint64(_GOLDEN))
    return np.float64(z >> np.uint64(11)) * _INV_2_53


@nb.njit(cache=True)
def _uniform_array(seed, indices, out):
    key = stream_key(seed)
    for i in range(indices.shape[0]):
        out[i] = uniform_keyed(key, indices[i])


class RandomStream:
    """Reproducible uniform stream keyed by ``(seed, index)``.

    >>> s = RandomStream(7)
    >>> s(3) == RandomStream(7)(3)
    True
    """

    __slots__ = ("seed",)

    def __init__(self, seed: int):
        if not -(1 << 63) <= seed < (1 << 64):
            raise ValueError(f"seed must fit in 64 bits, got {seed}")
        self.seed = seed & _MASK

    def __call__(self, index: int) -> float:
        return uniform_py(self.seed, index)

    def uniform(self, indices) -> np.ndarray:
        """Vectorised draws for an array of indices."""
        idx = np.ascontiguousarray(indices, dtype=np.int64)
        out = np.empty(idx.shape[0], dtype=np.float64)
        _uniform_array(np.uint64(self.seed), idx, out)
        return out

    def integers(self, start: int, count: int, high: int) -> np.ndarray:
        """``count`` integers uniform on ``[0, high)`` from indices ``start, start+1, ...``."""
        u = self.uniform(np.arange(start, start + count, dtype=np.int64))
        return np.minimum((u * high).astype(np.int64), high - 1)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed})"
