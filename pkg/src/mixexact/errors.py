"""Exception types and process exit codes shared across the package."""

from __future__ import annotations

EXIT_INVALID_CONFIG = 2
EXIT_INGEST_FAILURE = 3
EXIT_RESOURCE_LIMIT = 4
EXIT_ORACLE_CAP = 5


class MixtureError(Exception):
    """Base class for errors raised by this package."""


class IngestError(MixtureError):
    """Input data could not be parsed or failed validation."""


class ResourceLimitError(MixtureError):
    """The lattice exceeded its configured entry budget."""

    def __init__(self, message: str, entry_count: int):
        super().__init__(message)
        self.entry_count = entry_count


class OracleCapError(MixtureError):
    """The brute-force allocation count k**n exceeded the configured cap."""


class UnsupportedFamilyError(MixtureError):
    """The requested operation is not defined for this family."""
