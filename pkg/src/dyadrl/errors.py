"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Malformed arguments: dimension mismatches, out-of-range indices, non-finite data."""


class NumericError(ArithmeticError):
    """A covariance matrix could not be factorized even after jitter."""


class ConfigError(ValueError):
    """An experiment configuration names an unknown environment, algorithm or mode."""


class ParseError(ValueError):
    """A dyad-model file is missing fields or violates model invariants."""
