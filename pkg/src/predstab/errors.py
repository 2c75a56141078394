"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument violates an operation's precondition."""


class InvalidState(RuntimeError):
    """The object an operation acts on is not in a usable state."""


class ParseError(ValueError):
    """Malformed dataset or config input. ``line`` is 1-indexed when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
