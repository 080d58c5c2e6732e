"""
Exception and warning types raised across regimecast.

Library code raises these; the command line maps them to exit codes.
"""

from typing import Optional


class RegimecastError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgumentError(RegimecastError, ValueError):
    """A parameter lies outside the region where an operation is defined."""


class DimensionError(RegimecastError, ValueError):
    """Array shapes or sample lengths do not agree."""


class DecompositionError(RegimecastError, ArithmeticError):
    """A matrix that must be symmetric positive definite is not."""


class NumericalError(RegimecastError, ArithmeticError):
    """
    Numerical failure inside an algorithm.

    Attributes:
        block: name of the parameter block or step that failed, if known
        t: time index at which the failure happened, if known
    """

    def __init__(self, message: str, block: Optional[str] = None, t: Optional[int] = None):
        super().__init__(message)
        self.block = block
        self.t = t


class DegenerateDataError(NumericalError):
    """Input data carry no variation (for example a constant series)."""


class ExplosivePathError(NumericalError):
    """A simulated path left the admissible range."""


class ParseError(RegimecastError, ValueError):
    """Malformed input file; `row` is the 1-based line number in the file."""

    def __init__(self, message: str, row: Optional[int] = None):
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row


class DegenerateDataWarning(UserWarning):
    """Data are usable but degenerate, e.g. a zero residual variance."""


class NonFiniteDensityWarning(UserWarning):
    """A predictive density evaluated to zero or a non-finite value."""
