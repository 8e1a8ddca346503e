"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, OSError and
FileFormatError -> 3, DataConsistencyError -> 4.
"""


class SonarSweepError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SonarSweepError):
    """Invalid parameter, configuration value, or scene description."""


class InvalidSceneError(ConfigError):
    """Scene geometry is degenerate (e.g. a zero-area mesh)."""


class DegeneratePointError(SonarSweepError):
    """A point cannot be represented in the requested coordinates."""


class DataConsistencyError(SonarSweepError):
    """Inputs that should agree (shapes, manifests, estimates) do not."""


class FileFormatError(SonarSweepError):
    """A file does not conform to its declared on-disk format."""
