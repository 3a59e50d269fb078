"""Exception types shared across the package.

Plain ``ValueError`` is used for rejected inputs (bad shapes, bad
parameter values); the classes here mark the cases callers may want to
handle separately: broken data files, broken run configurations, and
numerical failures inside a solve.
"""


class DataError(ValueError):
    """A dataset, feature file, or model file is missing or malformed."""


class ConfigError(ValueError):
    """A run configuration is invalid or inconsistent."""


class NumericalError(ArithmeticError):
    """A linear solve failed or produced an unusable result."""
