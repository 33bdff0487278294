"""Exception hierarchy.

The CLI maps these onto exit statuses: configuration problems exit with 2,
data problems with 3, numerical failures with 4.
"""


class AcidError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AcidError, ValueError):
    """Invalid or unknown configuration key/value."""


class DataError(AcidError, ValueError):
    """Input data is missing, malformed or unusable."""


class DegenerateDataError(DataError):
    """Data has zero spread, so no bandwidth can be selected."""


class NoSupportError(AcidError, ValueError):
    """A query point carries no kernel mass (all weights are zero)."""


class NumericalError(AcidError, ArithmeticError):
    """A numerical routine failed (quadrature, factorization, non-finite update)."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class UnsupportedOperationError(AcidError, NotImplementedError):
    """The operation is not defined for this kernel or dimension."""
