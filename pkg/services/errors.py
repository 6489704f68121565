"""
Errors module.

Exception hierarchy shared by the library and the CLI. Each class carries the
process exit code the CLI reports for it.
"""


class RobexpError(Exception):
    """Base class for every error robexp raises on purpose."""

    exit_code = 1


class ConfigError(RobexpError):
    """Invalid run configuration, CLI arguments or command preconditions."""

    exit_code = 2


class DataError(RobexpError):
    """Dataset or model file could not be read, written or parsed."""

    exit_code = 3


class ModelFormatError(DataError):
    """Model file is not valid JSON or does not follow the model schema."""


class DimensionError(DataError, ValueError):
    """Shapes that must agree do not."""


class NumericError(RobexpError, ArithmeticError):
    """A computation produced NaN or infinite values."""

    exit_code = 4
