"""Exception hierarchy shared by the library and the command line."""


class TopcError(Exception):
    """Base class for all errors raised by this package."""


class FieldError(TopcError, ValueError):
    """Invalid grid dimensions, values or offsets."""


class ArchiveError(TopcError):
    """A compressed archive cannot be read."""


class BadMagic(ArchiveError):
    pass


class UnsupportedVersion(ArchiveError):
    pass


class TruncatedArchive(ArchiveError):
    pass


class ChecksumMismatch(ArchiveError):
    pass


class BackendError(ArchiveError):
    """The lossless backend failed to encode or decode its stream."""


class EncodingError(TopcError, ValueError):
    """Inputs to the encoder are inconsistent with each other."""


class ReconstructionError(TopcError):
    """Topological constraints could not be enforced on a field."""
