"""Exception hierarchy shared by every module of the package."""


class QAPError(Exception):
    """Base class for all errors raised by qap_anneal."""


class DimensionError(QAPError, ValueError):
    """A matrix or permutation does not match the instance size."""


class InvalidPairError(QAPError, ValueError):
    """A swap was requested for a degenerate or out-of-range facility pair."""


class UnsupportedInstanceError(QAPError):
    """The delta-matrix fast path needs a symmetric, zero-diagonal instance."""


class ContractViolationError(QAPError):
    """A caller broke a sequencing contract (e.g. update without snapshot)."""


class ConsistencyError(QAPError):
    """Internal state was observed in an inconsistent phase (stale delta matrix)."""


class ScheduleError(QAPError, ValueError):
    pass


class ConfigError(QAPError, ValueError):
    pass


class ParseError(QAPError, ValueError):
    """Malformed QAPLIB text. ``position`` is the 0-based token index, if known."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class TruncationError(ParseError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"expected {expected} tokens, got {actual}")
        self.expected = expected
        self.actual = actual


class SizeError(ParseError):
    pass


class DomainError(ParseError):
    pass
