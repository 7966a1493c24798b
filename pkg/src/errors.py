"""
Exceptions raised across the project.

Everything derives from ValueError so callers that already guard numeric code
with ``except ValueError`` keep working.
"""


class HwtError(ValueError):
    """Root of the project's exception hierarchy."""


class HaarSizeError(HwtError):
    """Requested transform order is zero, negative or above MAX_LEVELS."""


class ShapeError(HwtError):
    """Array shape or length does not match what the operation needs."""


class ParameterError(HwtError):
    """A parameter value is out of its valid range."""


class EncodingError(HwtError):
    """A patch cannot be amplitude-encoded (all zero or non-finite)."""


class CacheError(HwtError):
    """A backward pass was given a cache that does not belong to it."""


class QubitIndexError(HwtError):
    """Gate references a qubit outside the register, or control equals target."""


class ModelDescriptionError(HwtError):
    """A cost-model description or variant/policy name is malformed."""


class EmptyDatasetError(HwtError):
    """Training was requested on a dataset with no samples."""
