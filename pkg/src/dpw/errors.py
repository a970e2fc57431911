"""Exception hierarchy shared by every engine and the API error mapper."""

from __future__ import annotations

from typing import Any


class DpwError(Exception):
    """Base class; carries a stable machine-readable code plus details."""

    code = "error"

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    def to_payload(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


class ValidationError(DpwError):
    """Input violates an invariant or a precondition."""

    code = "validation_error"


class NotFoundError(DpwError):
    """A referenced entity does not exist."""

    code = "not_found"


class ConflictError(DpwError):
    """Optimistic concurrency check failed; nothing was applied."""

    code = "conflict"


class AuthenticationError(DpwError):
    """Missing, unknown, or expired session token."""

    code = "auth_error"


class ImportJobError(DpwError):
    """Whole-payload failure; the store was left untouched."""

    code = "import_error"


class StageUnavailable(DpwError):
    """Not a hard error: a score stage lacks input data and is skipped."""

    code = "stage_unavailable"
