"""Exception types shared across the pipeline.

Exit-code mapping used by the command line front end:
ConfigError -> 1, DataError -> 2, anything else unexpected -> 3.
"""

from __future__ import annotations


class TransitLinkError(Exception):
    """Base class for errors raised deliberately by this package."""


class ConfigError(TransitLinkError):
    """Invalid configuration, flags, or hyperparameters supplied by the caller."""


class DataError(TransitLinkError):
    """Input data violates a documented contract (schema, labels, node sets)."""


class FormatError(DataError):
    """A file cannot be parsed at all: wrong header, missing columns, or the
    record-level error cap was exceeded."""
