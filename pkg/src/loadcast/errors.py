"""Exception hierarchy shared by all loadcast modules.

Each error carries a short machine code used by the HTTP layer to pick a
status and by the CLI to pick an exit code.
"""

from __future__ import annotations


class LoadcastError(Exception):
    """Base class for all errors raised by this package."""

    code = "internal"

    def __init__(self, message: str, detail: dict | None = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}


class InvalidInputError(LoadcastError):
    """Caller passed data that violates an operation's preconditions."""

    code = "invalid_input"


class ParseError(InvalidInputError):
    """A load CSV could not be parsed; names the offending row."""

    def __init__(self, message: str, row: int | None = None):
        detail = {"row": row} if row is not None else {}
        super().__init__(message, detail)
        self.row = row


class ConfigurationError(InvalidInputError):
    """Missing or inconsistent configuration (unknown timezone, bad config file)."""


class NotFoundError(LoadcastError):
    """Requested record (series, model, country) does not exist."""

    code = "not_found"


class InsufficientDataError(LoadcastError):
    """Not enough usable data to carry out the operation."""

    code = "insufficient_data"


class IntegrityError(LoadcastError):
    """A stored document is corrupt; message names the file."""

    code = "internal"
