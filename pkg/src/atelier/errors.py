"""Exception types shared across the package.

Data-dependent failures (bad files, unclassifiable images, corrupt models)
derive from AtelierError so callers can catch them as one family.
Programming-contract violations raise plain ValueError.
"""


class AtelierError(Exception):
    """Base class for data-dependent failures."""


class ImageError(AtelierError):
    """Unreadable or unsupported image file."""


class ManifestError(AtelierError):
    """Malformed or inconsistent manifest file."""


class DataError(AtelierError):
    """Input data violates an operation's requirements."""


class UnclassifiableError(DataError):
    """No tiles passed the entropy sieve; the image cannot be scored."""


class ModelFormatError(AtelierError):
    """Model file is corrupt, truncated, or from an unsupported version."""


class TrainingError(AtelierError):
    """Training diverged or hit a non-finite loss."""
