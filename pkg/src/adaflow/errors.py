"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and
subclasses) -> 3.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class DataError(ValueError):
    """Invalid input data (files, arrays, index ranges)."""


class FormatError(DataError):
    """A file does not parse as the expected on-disk format."""


class DimensionError(DataError):
    """Array shapes or vector lengths do not line up."""
