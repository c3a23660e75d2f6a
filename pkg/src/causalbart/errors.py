"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific one that applies.
"""

from __future__ import annotations


class CausalBartError(Exception):
    """Base class for all package errors."""


class ConfigError(CausalBartError):
    """Invalid or inconsistent configuration (bad schema, bad parameter)."""


class DataError(CausalBartError):
    """Malformed or unusable input data."""


class NumericError(CausalBartError):
    """A computation failed or produced non-finite results."""


class StageError(CausalBartError):
    """Pipeline stage failure wrapping the underlying cause."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
