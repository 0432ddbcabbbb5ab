"""Exception hierarchy shared by every module of the package."""


class NspError(Exception):
    """Base class for all errors raised by nspforge."""


class ShapeError(NspError, ValueError):
    """Array or sequence dimensions do not match."""


class ParseError(NspError, ValueError):
    """Malformed input document.

    ``line`` is the 1-based line number of the offending line when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConsistencyError(NspError, ValueError):
    """Two inputs that must agree (items vs utilities, itemsets vs supports) do not."""


class IncompleteAssignmentError(NspError, ValueError):
    """An operation that needs every nurse assigned received a partial assignment."""


class CapacityError(NspError, ValueError):
    """A domain would be too large to materialise."""


class LearningError(NspError, ValueError):
    """Empty or inconsistent training corpus."""


class TrainingError(NspError, ValueError):
    """A classifier was given nothing to learn from, or labels it cannot represent."""
