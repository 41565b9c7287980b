"""QAPLIB text format and seeded random instances.

A QAPLIB file is a stream of whitespace-separated integers: ``N``, then the
flow matrix row by row, then the distance matrix row by row.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Instance, n_pairs
from .errors import DomainError, ParseError, SizeError, TruncationError
from .rng import RandomStream


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    seed: int
    max_value: int = 100

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.max_value < 1:
            raise ValueError(f"max_value must be at least 1, got {self.max_value}")


def parse_qaplib(text: str) -> Instance:
    tokens = text.split()
    if not tokens:
        raise TruncationError(expected=1, actual=0)
    values = []
    for pos, tok in enumerate(tokens):
        try:
            values.append(int(tok))
        except ValueError:
            raise ParseError(f"token {pos} is not an integer: {tok!r}", position=pos) from None
    n = values[0]
    if n < 2:
        raise SizeError(f"problem size must be at least 2, got {n}", position=0)
    expected = 1 + 2 * n * n
    if len(values) != expected:
        raise TruncationError(expected=expected, actual=len(values))
    data = np.array(values[1:], dtype=np.int64)
    negative = np.flatnonzero(data < 0)
    if negative.size:
        pos = int(negative[0]) + 1
        raise DomainError(f"token {pos} is negative: {values[pos]}", position=pos)
    return Instance(data[: n * n].reshape(n, n), data[n * n :].reshape(n, n))


def write_qaplib(instance: Instance) -> str:
    def block(m):
        return "".join(" ".join(str(int(x)) for x in row) + "\n" for row in m)

    return f"{instance.n}\n{block(instance.a)}\n{block(instance.b)}"


def read_qaplib(path) -> Instance:
    return parse_qaplib(Path(path).read_text())


def generate_taixxa(spec: GeneratorSpec) -> Instance:
    """Random symmetric zero-diagonal instance with entries uniform on ``[1, max_value]``.

    Draw ``i`` of ``RandomStream(spec.seed)`` fills, in order, A's upper
    triangle row by row and then B's.
    """
    n = spec.n
    m = n_pairs(n)
    values = 1 + RandomStream(spec.seed).integers(0, 2 * m, spec.max_value)
    rows, cols = np.triu_indices(n, 1)
    mats = []
    for part in (values[:m], values[m:]):
        mat = np.zeros((n, n), dtype=np.int64)
        mat[rows, cols] = part
        mat[cols, rows] = part
        mats.append(mat)
    return Instance(*mats)
