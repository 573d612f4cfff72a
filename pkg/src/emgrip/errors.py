"""Exception hierarchy shared across the package."""


class EmgripError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(EmgripError):
    """Incompatible configuration: bad parameter values or mismatched shapes."""


class DataError(EmgripError):
    """Malformed or insufficient input data (series, files, layouts)."""


class NumericError(EmgripError):
    """Degenerate numerical situation (zero variance, singular systems)."""
