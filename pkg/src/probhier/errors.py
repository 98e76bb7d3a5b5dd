"""Exception types shared across the package."""


class ProbhierError(Exception):
    """Base class for every error raised by this package."""


class InputError(ProbhierError):
    """Malformed or inconsistent input text: signatures, feature structures,
    parameter files, grammars, treebanks."""

    def __init__(self, message, line=None, col=None):
        self.message = message
        self.line = line
        self.col = col
        if line is not None:
            where = f"line {line}" if col is None else f"line {line}, col {col}"
            message = f"{where}: {message}"
        super().__init__(message)


class ModelError(ProbhierError):
    """An operation precondition or model invariant was violated."""
