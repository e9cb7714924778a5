"""Exception hierarchy shared by every module.

The CLI maps ``UsageError`` (and subclasses) to exit code 2 and
``NumericError`` (and subclasses) to exit code 3.
"""


class SQSError(Exception):
    """Base class for all package errors."""


class UsageError(SQSError, ValueError):
    """Invalid arguments, configuration or input data."""


class ConfigurationError(UsageError):
    """A configuration value is out of its allowed range."""


class DimensionError(UsageError):
    """Operand shapes do not agree."""


class IngestionError(UsageError):
    """A data file could not be read into a dataset."""


class NumericError(SQSError, ArithmeticError):
    """A computation produced non-finite or otherwise unusable numbers."""


class ConvergenceError(NumericError):
    """An iterative solver hit its iteration cap.

    ``last_value`` carries the final iterate's estimate.
    """

    def __init__(self, message: str, last_value: float | None = None):
        super().__init__(message)
        self.last_value = last_value
