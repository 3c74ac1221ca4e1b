"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError and
BundleError -> 3, NumericalError -> 4.
"""


class TexgramError(Exception):
    """Base class for all package-specific failures."""


class BundleError(TexgramError):
    """Malformed or inconsistent weight bundle."""


class ConfigError(TexgramError):
    """Invalid pipeline configuration or CLI arguments."""


class DataError(TexgramError):
    """Problem with input data: dataset layout, images, CSV files."""


class NumericalError(TexgramError):
    """Non-finite values or a numerical procedure that failed to converge."""
