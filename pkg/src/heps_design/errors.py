"""Exception hierarchy shared by every heps_design module."""
from typing import Optional


class HepsError(Exception):
    """Base class for all errors raised by heps_design."""


class DomainError(HepsError, ValueError):
    """An argument violates a precondition of the operation.

    Args:
        message (str): Human readable description.
        field (Optional[str]): Name of the offending field, when there is one.
    """

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class CoverageError(DomainError):
    """A lookup query falls outside the grid covered by a strategy map."""


class Unreachable(HepsError):
    """The commanded power cannot be transferred at the given inner shift."""

    def __init__(self, p_target: float, p_max: float):
        super().__init__(f"target power {p_target:.3f} W exceeds the attainable {p_max:.3f} W")
        self.p_target = p_target
        self.p_max = p_max


class ConfigError(HepsError):
    """Configuration file is missing, unparsable or inconsistent."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field
