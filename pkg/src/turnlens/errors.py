"""Shared exception types.

Anything raised as :class:`DataError` means the *input* was bad (malformed
document, schema violation, mismatched ids) as opposed to a bug or an
environment failure. The CLI maps DataError to exit code 2.
"""
from __future__ import annotations


class DataError(ValueError):
    """Invalid input data."""


class CorpusError(DataError):
    """Conversation or manifest document violates the corpus schema."""


class FormatError(DataError):
    """FSET/FRMX payload violates the binary contract."""


class ConfigError(DataError):
    """Experiment or profile configuration is invalid."""
