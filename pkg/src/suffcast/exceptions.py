"""Error and warning types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataQualityError -> 3,
NumericalError -> 4.  Library code raises them directly.
"""

__all__ = [
    "SuffcastError",
    "ConfigError",
    "DataQualityError",
    "NumericalError",
    "DegeneracyWarning",
]


class SuffcastError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SuffcastError):
    """Invalid option, flag, or parameter combination."""


class DataQualityError(SuffcastError):
    """Input data is malformed: non-finite values, ragged CSV rows, bad cells."""


class NumericalError(SuffcastError):
    """A numerical precondition failed: singular matrix, rank deficiency."""


class DegeneracyWarning(UserWarning):
    """A computation succeeded but the result is numerically degenerate
    (tied eigenvalues, near-zero kernel mass, rank below nominal)."""
