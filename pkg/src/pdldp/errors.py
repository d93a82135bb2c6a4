"""Exception types shared across the package.

The CLI maps these onto exit codes: domain errors exit 1, accuracy and
numeric errors exit 2.
"""


class PdldpError(Exception):
    """Base class for all package errors."""


class DomainError(PdldpError, ValueError):
    """An argument lies outside the domain of the operation."""


class OrderingError(DomainError):
    """A sequence required to be descending is not."""


class AccuracyError(PdldpError):
    """A truncated construction could not meet its accuracy tolerance."""


class NumericError(PdldpError, ArithmeticError):
    """An iterative or quadrature routine failed to deliver a usable value."""


class UnsupportedOrderError(DomainError):
    """A series or nested integral was requested beyond the supported order."""


class InsufficientDataError(PdldpError):
    """Too few usable points to fit a regression."""
