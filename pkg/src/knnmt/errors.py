"""Exception types shared across the toolkit."""


class KnnMTError(Exception):
    """Base class for data errors raised by this package."""


class LineCountMismatch(KnnMTError):
    pass


class EmptyCorpus(KnnMTError):
    pass


class InvalidToken(KnnMTError, ValueError):
    pass


class DimensionMismatch(KnnMTError, ValueError):
    pass


class EmptyDevSet(KnnMTError):
    pass


class NoExamples(KnnMTError):
    pass


class BadMagic(KnnMTError):
    """A persisted file does not start with the expected magic bytes."""


class LengthMismatch(KnnMTError, ValueError):
    pass


class EmptyInput(KnnMTError, ValueError):
    pass


class SingleClassWarning(UserWarning):
    """Training examples contain only one label; the bias drifts toward the clamp."""
