"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies.
"""


class ThermocalError(Exception):
    """Base class for package-specific errors."""


class DomainError(ThermocalError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class DataError(ThermocalError, RuntimeError):
    """An input file is malformed, inconsistent, or missing required content."""


class ConfigError(ThermocalError, RuntimeError):
    """A run configuration is invalid or references missing resources."""


class SimulationError(DomainError):
    """Forward-model failure, annotated with the failing time index."""

    def __init__(self, message: str, time_index: int | None = None):
        super().__init__(message)
        self.time_index = time_index
