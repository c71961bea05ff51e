"""Exception hierarchy shared by every stairprune module."""

from __future__ import annotations


class StairpruneError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(StairpruneError, ValueError):
    """A value violates a documented invariant."""


class GeometryError(ValidationError):
    """Convolution geometry yields a non-integral or empty output size."""


class RangeError(ValidationError):
    """A count argument lies outside its permitted range."""


class EmptyCurveError(ValidationError):
    """An operation received no latency points."""


class DegenerateClusterError(ValidationError):
    """More regimes were requested than the curve has distinct levels."""


class UnknownNetworkError(StairpruneError, LookupError):
    """No built-in network is registered under the requested name."""


class CalibrationError(StairpruneError, ValueError):
    """Cost coefficients are missing or inconsistent with the split model."""


class DegenerateCalibrationError(CalibrationError):
    """Both calibration tables describe the same channel count."""


class InfeasibleBudgetError(StairpruneError):
    """No configuration meets the requested latency budget."""


class InfeasibleAccuracyError(StairpruneError):
    """No configuration meets the requested accuracy floor."""


class ParseError(StairpruneError, ValueError):
    """A data file is malformed; ``lineno`` is 1-based when known."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
