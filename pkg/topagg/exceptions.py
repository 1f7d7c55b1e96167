"""
Exceptions for the topagg toolkit.
"""

from typing import Optional


class TopAggError(Exception):
    """Base exception for all topagg errors."""

    exit_code_default: int = 1

    def __init__(
        self,
        message: str,
        exit_code: Optional[int] = None,
        error_code: Optional[str] = None,
    ):
        self.message = message
        self.exit_code = exit_code if exit_code is not None else self.exit_code_default
        self.error_code = error_code
        super().__init__(self.message)

    def __str__(self) -> str:
        error_str = self.message
        if self.error_code:
            error_str += f" (Error Code: {self.error_code})"
        return error_str


class ValidationError(TopAggError):
    """Raised when an input vector or record fails validation (non-finite values, bad alphabet)."""

    exit_code_default = 2


class DimensionMismatchError(ValidationError):
    """Raised when vectors, sketches or models disagree on dimension."""

    pass


class ParameterError(TopAggError):
    """Raised when a mechanism parameter is outside its documented range."""

    exit_code_default = 2


class ConfigurationError(TopAggError):
    """Raised when a configuration file or flag set does not satisfy the schema."""

    exit_code_default = 2


class InfiniteBudgetError(TopAggError):
    """Raised when a privacy computation is asked for a mechanism without noise."""

    exit_code_default = 3


class BudgetExhaustedError(TopAggError):
    """Raised when the privacy budget does not allow a single aggregation round."""

    exit_code_default = 3


class InvariantViolationError(TopAggError):
    """Raised when an internal invariant check fails."""

    exit_code_default = 4
