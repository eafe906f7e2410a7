"""Exception hierarchy shared across the package.

CLI exit codes map onto these: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class StyleForgeError(Exception):
    """Base class for all package errors."""


class ConfigError(StyleForgeError):
    """Bad configuration file, unknown key, or invalid flag combination."""


class DataError(StyleForgeError):
    """Missing or unreadable dataset/image/checkpoint content."""


class NumericalError(StyleForgeError):
    """Non-finite loss or other numerical failure during training."""
