"""Exception types shared across the package."""


class GraphSamplingError(Exception):
    """Base class for all errors raised by graphsampling."""

    code = "error"


class InvalidParameterError(GraphSamplingError, ValueError):
    code = "invalid-parameter"


class InvalidInputError(GraphSamplingError, ValueError):
    code = "invalid-input"


class InvalidKernelError(GraphSamplingError, ValueError):
    code = "invalid-kernel"


class ParseError(GraphSamplingError, ValueError):
    """Malformed external file. ``line`` is 1-based when known."""

    code = "parse-error"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RankDeficientWarning(UserWarning):
    """A least-squares system was solved with a rank-deficient matrix."""
