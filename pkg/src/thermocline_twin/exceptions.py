"""Exception hierarchy for the toolkit.

Each exception carries a machine readable ``details`` payload and the exit code
the command line maps it to.
"""

from typing import Any


class ThermoTwinError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 1

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details: dict[str, Any] = details

    def to_dict(self) -> dict[str, Any]:
        """Render the error document written to stderr by the CLI."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


class ConfigError(ThermoTwinError):
    """Malformed or invalid configuration."""

    exit_code = 3


class ParameterError(ThermoTwinError):
    """Invalid parameter values (even window, infeasible bounds, ...)."""

    exit_code = 3


class ManifestError(ThermoTwinError):
    """Missing artifact, manifest or data file."""

    exit_code = 4


class NumericError(ThermoTwinError):
    """Non-finite values or guard band violations."""

    exit_code = 5


class IntegrationError(NumericError):
    """Time integration failed before reaching the requested time."""


class DivergenceError(NumericError):
    """A rollout blew up or a training loss became non-finite."""


class SingularityError(NumericError):
    """Rank-deficient least squares system or covariance factorization failure."""


class InstabilityError(NumericError):
    """Too many sampled surrogate models diverged."""


class DataError(ThermoTwinError):
    """Data unsuitable for the requested operation."""

    exit_code = 6


class ShapeError(DataError):
    """Length or dimension mismatch."""


class SpanMismatchError(ShapeError):
    """Resampling target exceeds the source time span."""


class EmptyModelError(DataError):
    """Thresholding eliminated every library column of a state equation."""


class InsufficientDataError(DataError):
    """Too few items to estimate the requested statistic."""


class CombinatoricsError(DataError):
    """Not enough distinct subsets can be drawn from the pool."""
