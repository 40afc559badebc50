"""Exception hierarchy.

Every error carries a stable ``code`` string; per-metric failures in a report
record that code instead of a number.
"""

from __future__ import annotations


class EvalKitError(Exception):
    code = "Error"


class UnsupportedFormat(EvalKitError):
    code = "UnsupportedFormat"


class CorruptFile(EvalKitError):
    code = "CorruptFile"


class OutOfBounds(EvalKitError):
    code = "OutOfBounds"


class UnknownSpeaker(EvalKitError):
    code = "UnknownSpeaker"


class SampleRateTooLow(EvalKitError):
    code = "SampleRateTooLow"


class ClipTooShort(EvalKitError):
    code = "ClipTooShort"


class InsufficientWindows(EvalKitError):
    code = "InsufficientWindows"


class ZeroNormEmbedding(EvalKitError):
    code = "ZeroNormEmbedding"


class EmptyInput(EvalKitError):
    code = "EmptyInput"


class MissingAlignment(EvalKitError):
    code = "MissingAlignment"


class EmptyReference(EvalKitError):
    code = "EmptyReference"


class MalformedResponse(EvalKitError):
    code = "MalformedResponse"


class TooManyMalformedResponses(EvalKitError):
    code = "TooManyMalformedResponses"


class InsufficientTrials(EvalKitError):
    code = "InsufficientTrials"


class DegenerateInput(EvalKitError):
    code = "DegenerateInput"


class InsufficientRaters(EvalKitError):
    code = "InsufficientRaters"


class NonPositiveDuration(EvalKitError):
    code = "NonPositiveDuration"


class EmptyGroup(EvalKitError):
    code = "EmptyGroup"


class SchemaViolation(EvalKitError):
    code = "SchemaViolation"

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class DuplicateId(SchemaViolation):
    code = "DuplicateId"


class BackendError(EvalKitError):
    """Base for failures talking to an external model."""

    code = "BackendError"


class BackendUnavailable(BackendError):
    code = "BackendUnavailable"


class BackendMalformedResponse(BackendError):
    code = "BackendMalformedResponse"


class RateLimited(BackendError):
    code = "RateLimited"


class DimensionMismatch(BackendError):
    code = "DimensionMismatch"


class PayloadTooLarge(BackendError):
    code = "PayloadTooLarge"
