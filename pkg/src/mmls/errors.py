"""Exception hierarchy. Every error carries a stable ``code`` used by the CLI."""


class MmlsError(Exception):
    code = "mmls"


class DomainError(MmlsError, ValueError):
    code = "domain"


class ConfigError(MmlsError, ValueError):
    code = "config"


class ParseError(MmlsError, ValueError):
    code = "parse"

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class InsufficientDataError(MmlsError):
    code = "insufficient-data"

    def __init__(self, message, required=None, available=None):
        super().__init__(message)
        self.required = required
        self.available = available


class DegenerateDataError(MmlsError):
    code = "degenerate-data"

    def __init__(self, message, rank=None, required=None):
        super().__init__(message)
        self.rank = rank
        self.required = required


class DegenerateNeighborhoodError(DegenerateDataError):
    """Too few (or collinear) weighted neighbors for a local least-squares fit."""

    code = "degenerate-neighborhood"


class NoSupportError(DegenerateNeighborhoodError):
    """All weights vanish at the query: it lies outside the data support."""

    code = "no-support"
