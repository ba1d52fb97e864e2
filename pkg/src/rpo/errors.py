"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: config problems exit 1, data problems
exit 2, numeric failures exit 3.
"""


class RpoError(Exception):
    """Base class for package-specific failures."""


class ConfigError(RpoError):
    """Invalid or unparseable run configuration."""


class DataError(RpoError):
    """Malformed input data, impossible split, or I/O problem."""


class NumericError(RpoError):
    """Numerical failure: non-finite loss, singular covariance, etc."""
