"""Exception hierarchy shared by the whole pipeline.

The CLI maps these onto distinct exit codes (see cli.py), so new error
conditions should reuse one of the classes below instead of raising bare
ValueError/RuntimeError.
"""


class WiviError(Exception):
    """Base class for every error this package raises on purpose."""


class DataError(WiviError, ValueError):
    """Invalid values, shapes, or preconditions on in-memory data."""


class DimensionError(DataError):
    """Array/matrix dimensions incompatible with the requested operation."""


class TooShortError(DataError):
    """Input series/sequence/segment shorter than the operation requires."""


class ConfigError(WiviError):
    """Unparseable or invalid configuration (file or programmatic)."""


class FormatError(WiviError):
    """Malformed binary file content."""


class TruncatedRecordError(FormatError):
    """EOF in the middle of a framed record."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (record starts at byte offset {offset})")
        self.offset = offset


class VersionError(FormatError):
    """File magic/version does not match what the reader supports."""
