"""Exception hierarchy shared across the package."""


class FibcqError(Exception):
    """Base class for all errors raised by fibcq."""


class DomainError(FibcqError, ValueError):
    """An argument lies outside the domain of an operation."""


class UnsupportedError(FibcqError, ValueError):
    """The operation is not defined for this configuration (e.g. FCQ at 16 bits)."""


class CorruptStreamError(FibcqError, ValueError):
    """A word-count stream failed to decode.

    ``offset`` is the index of the offending codeword within the stream.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (codeword {offset})")
        self.offset = offset


class ContractViolation(FibcqError, RuntimeError):
    """A caller-supplied hook broke its contract (e.g. touched frozen weights)."""


class DivergenceError(FibcqError, ArithmeticError):
    """Training produced a non-finite loss."""


class ContainerFormatError(FibcqError, ValueError):
    """An FQZ1 byte stream could not be parsed.

    ``offset`` is the byte position at which parsing failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset
