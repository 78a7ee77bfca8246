"""Exception types shared across the engine.

Each error carries a machine-readable ``code`` and, where it applies, the
``field`` that failed validation, so the HTTP layer can emit its
``{code, field, message}`` envelope without string parsing.
"""

from __future__ import annotations


class LandTriageError(Exception):
    """Base class for all engine errors."""

    def __init__(self, message: str, *, code: str = "error", field: str | None = None):
        super().__init__(message)
        self.message = message
        self.code = code
        self.field = field

    def to_dict(self) -> dict:
        return {"code": self.code, "field": self.field, "message": self.message}


class ValidationError(LandTriageError):
    """Input rejected: bad value, broken invariant, malformed document."""

    def __init__(self, message: str, *, code: str = "validation_error", field: str | None = None):
        super().__init__(message, code=code, field=field)


class NotFoundError(LandTriageError):
    """Referenced entity does not exist."""

    def __init__(self, message: str, *, code: str = "not_found", field: str | None = None):
        super().__init__(message, code=code, field=field)


class ConflictError(LandTriageError):
    """State conflict: double screening, duplicate response, replayed id."""

    def __init__(self, message: str, *, code: str = "conflict", field: str | None = None):
        super().__init__(message, code=code, field=field)
