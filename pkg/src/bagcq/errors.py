"""Shared exception types."""


class BagcqError(Exception):
    pass


class QuerySyntaxError(BagcqError):
    """Raised on malformed query or inequality text, with position info."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class ArityMismatch(BagcqError):
    pass


class NotChordal(BagcqError):
    pass


class ResourceCapExceeded(BagcqError):
    """A configured size or work cap was hit; carries what was exceeded."""

    def __init__(self, what, needed=None, cap=None):
        self.what = what
        self.needed = needed
        self.cap = cap
        detail = f"{what} cap exceeded"
        if needed is not None:
            detail += f" (needed {needed}, cap {cap})"
        super().__init__(detail)


class HomomorphismLimitExceeded(BagcqError):
    """Enumeration passed the requested limit; carries the partial count."""

    def __init__(self, partial_count):
        self.partial_count = partial_count
        super().__init__(f"homomorphism limit exceeded ({partial_count} found)")
