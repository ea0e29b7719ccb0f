"""Exception hierarchy shared by the library, the CLI, and the HTTP service.

Class names double as the machine-readable error codes: the CLI prints them
to stderr and the service puts them in the JSON ``error`` field.
"""


class TokenForgeError(Exception):
    """Base class for all domain errors."""

    def __init__(self, detail: str = ""):
        super().__init__(detail)
        self.detail = detail

    @property
    def code(self) -> str:
        return type(self).__name__


# index / payload parsing
class BadMagic(TokenForgeError):
    pass


class UnsupportedVersion(TokenForgeError):
    pass


class UnknownDType(TokenForgeError):
    pass


class TruncatedIndex(TokenForgeError):
    pass


class InconsistentPointers(TokenForgeError):
    pass


# addressing
class SeqOutOfRange(TokenForgeError):
    pass


class SliceOutOfRange(TokenForgeError):
    pass


class DocOutOfRange(TokenForgeError):
    pass


class StepOutOfRange(TokenForgeError):
    pass


class SampleOutOfRange(TokenForgeError):
    pass


class SelectionOutOfRange(TokenForgeError):
    pass


# writing / editing
class TokenOverflowsDType(TokenForgeError):
    pass


class EmptyDocument(TokenForgeError):
    pass


class IoFailure(TokenForgeError):
    pass


class LockNotHeld(TokenForgeError):
    pass


class ResultEmptySequence(TokenForgeError):
    pass


# ingest / export
class MissingTokenizer(TokenForgeError):
    pass


class MissingDetokenizer(TokenForgeError):
    pass


class MalformedRecord(TokenForgeError):
    pass


# ordering
class DatasetTooSmall(TokenForgeError):
    pass


# sampling
class PolicyInvalid(TokenForgeError):
    pass


# search
class EmptyQuery(TokenForgeError):
    pass


class StaleIndex(TokenForgeError):
    pass


class NoContinuationAnywhere(TokenForgeError):
    pass


# service
class BindFailure(TokenForgeError):
    pass


class DatasetInvalid(TokenForgeError):
    pass
