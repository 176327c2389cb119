"""Exception hierarchy for the fscache package.

Every error raised on a user-facing path derives from FscacheError so the
CLI can map validation failures to a single exit code.
"""


class FscacheError(Exception):
    """Base class for all fscache errors."""


class NonFiniteError(FscacheError):
    """A vector, gradient, or loss contains NaN or infinity."""


class ZeroVectorError(FscacheError):
    """A vector with (near-)zero Euclidean norm cannot be normalized."""


class BadMagicError(FscacheError):
    """File does not start with the FSEB magic bytes."""


class VersionUnsupportedError(FscacheError):
    """Embedding file declares a format version this reader does not know."""


class DimensionMismatchError(FscacheError):
    """Vector or matrix dimensions disagree with the declared dimension."""


class CorruptRecordError(FscacheError):
    """A record in an embedding file failed validation.

    Carries the zero-based index of the offending record.
    """

    def __init__(self, record_index: int, reason: str):
        self.record_index = record_index
        self.reason = reason
        super().__init__(f"record {record_index}: {reason}")


class MetadataMismatchError(FscacheError):
    """Embedding sets disagree on dimension, backbone, or layer."""


class DuplicateIdError(FscacheError):
    """Two records share the same id."""


class NoRealRecordsError(FscacheError):
    """Support sampling needs at least one real record."""


class NoFakeRecordsError(FscacheError):
    """Support sampling needs at least one fake source."""


class NotNormalizedError(FscacheError):
    """A vector expected to be unit-norm is not (tolerance 1e-5)."""


class NonPositiveAlphaError(FscacheError):
    """The activation sharpness alpha must be strictly positive."""


class LengthMismatchError(FscacheError):
    """Two sequences that must align have different lengths."""


class EmptyCacheError(FscacheError):
    """Prediction requires a cache with at least one entry."""


class EmptySupportError(FscacheError):
    """An operation requires a nonempty support set."""


class SupportMismatchError(FscacheError):
    """Fine-tuning was given a support set other than the one cached."""


class EmptyInputError(FscacheError):
    """A metric was called on an empty prediction list."""


class NoPositivesError(FscacheError):
    """Average precision is undefined without at least one positive."""
