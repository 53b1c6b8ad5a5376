"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of the operation."""


class NumericalError(RuntimeError):
    """An iteration failed to converge or a float computation broke down."""


class RangeError(NumericalError):
    """A value left the representable range (e.g. exponent overflow)."""
