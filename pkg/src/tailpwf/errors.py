"""Exception hierarchy.  The CLI maps each family to its own exit code."""
from __future__ import annotations


class TailPwfError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TailPwfError):
    pass


class DataError(TailPwfError):
    """Bad or insufficient input data."""


class InputError(DataError):
    pass


class ParseError(DataError):
    pass


class ValidationError(DataError):
    pass


class AlignmentError(DataError):
    pass


class WindowError(DataError):
    pass


class DomainError(TailPwfError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class CoverageError(DomainError):
    pass


class FitError(TailPwfError):
    def __init__(self, message, initial=None, last=None):
        super().__init__(message)
        self.initial = initial
        self.last = last


class DegenerateSampleError(FitError):
    pass


class OptimizationError(TailPwfError):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class InfeasibleTangencyError(OptimizationError):
    pass


class InsufficientDataError(DataError):
    pass
