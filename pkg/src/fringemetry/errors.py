"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/validation problems exit 1,
numerical failures exit 2, violated internal invariants exit 3.
"""


class FringemetryError(Exception):
    """Base class for all package errors."""


class ValidationError(FringemetryError):
    """Bad user input: parameter out of range, malformed config, unknown key."""


class NumericalError(FringemetryError):
    """A numerical routine failed to converge or produced garbage."""


class QuadratureError(NumericalError):
    """Adaptive integration did not reach the requested tolerance."""


class DegenerateModelError(NumericalError):
    """The model carries no information about the phase (zero denominator)."""


class InvariantViolation(FringemetryError):
    """An internal consistency check failed; indicates a bug, not bad input."""
