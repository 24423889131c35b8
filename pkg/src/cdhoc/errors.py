"""Exception hierarchy.

``ValidationError`` covers bad input data or files (CLI exit code 1);
``ModelError`` covers failures while fitting or applying a model (exit code 2).
"""


class CdhocError(Exception):
    """Base class for all package errors."""


class ValidationError(CdhocError, ValueError):
    """Input data, schema or configuration is invalid."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GapTooLongError(ValidationError):
    pass


class ModelError(CdhocError, ValueError):
    """A fitting or prediction stage could not complete."""

    def __init__(self, message, stage=None):
        if stage is not None:
            message = f"[{stage}] {message}"
        super().__init__(message)
        self.stage = stage


class NoVarianceError(ModelError):
    """A regressor or target has zero variance."""


class ConstantOccupancyError(NoVarianceError):
    """Occupancy range is zero, so NRMSE is undefined."""


class CollinearityError(ModelError):
    pass


class DegenerateNeighborhoodError(ModelError):
    """A local regression has too few positively weighted points."""


class AperiodicError(ModelError):
    """No repeating seasonal motif was found."""


class VacantWindowError(ModelError):
    """No time-of-day interval is vacant on every observed day."""
