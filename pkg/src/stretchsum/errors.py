"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class RegimeError(DomainError):
    """The threshold is not in the large-deviation regime x > D * E[X]."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""


class NumericError(ArithmeticError):
    """A numerical routine (quadrature, summation) failed to converge."""


class ResourceError(RuntimeError):
    """A request would need more terms or memory than the hard limits allow."""
