"""Exception hierarchy shared by every esrsim module."""


class ESRError(Exception):
    """Base class for all simulator errors."""


class LengthMismatch(ESRError, ValueError):
    pass


class InvalidN(ESRError, ValueError):
    pass


class QubitLimitExceeded(ESRError, MemoryError):
    pass


class IndexOutOfRange(ESRError, IndexError):
    pass


class UnknownBlock(ESRError, KeyError):
    pass


class DegenerateState(ESRError, ArithmeticError):
    """Raised when a state's norm collapses; always an internal bug."""


class TableTooLarge(ESRError, MemoryError):
    pass


class MalformedTranscript(ESRError, ValueError):
    pass
