"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2, data
problems exit 3, numerical failures exit 4.
"""


class DmlregError(Exception):
    """Base class for all package errors."""


class ConfigError(DmlregError):
    """Invalid configuration or hyperparameter combination."""


class DataError(DmlregError):
    """Malformed or inconsistent input data."""


class NumericalError(DmlregError):
    """A numerical routine failed."""


class DimensionMismatchError(DataError):
    """Operand shapes do not agree."""


class NotSPDError(NumericalError):
    """Linear system is singular or not positive definite."""


class InvalidRangeError(ConfigError):
    """Interval bounds are not ordered lo < hi."""


class InvalidScaleError(ConfigError):
    """A scale parameter (standard deviation) is negative."""


class EmptyPairSetError(DataError):
    """Similar or dissimilar pair list is empty."""


class DegeneratePairsError(DataError):
    """Every dissimilar pair has zero feature difference, so the
    dissimilarity constraint cannot be satisfied."""


class TooManyPairsError(DataError):
    """Requested more similar/dissimilar pairs than distinct pairs exist."""


class NonBinaryResponseError(DataError):
    """Logistic regression response contains values other than 0 and 1."""


class InvalidHyperparameterError(ConfigError):
    """Hyperparameter outside its valid domain (lambda <= 0, k < 1, ...)."""


class TooFewRowsError(DataError):
    """Fewer rows than cross-validation folds."""
