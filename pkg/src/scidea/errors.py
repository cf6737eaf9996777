"""Shared error type carrying a stable machine-readable code.

Every operational failure in the package raises ScideaError with a stable
string code; the HTTP layer maps codes to status responses and the CLI maps
them to exit codes. Codes in use:

  validation   OUT_OF_RANGE, ILLEGAL_TRANSITION, EMPTY_INPUT
  retrieval    MALFORMED_ID, SOURCE_UNAVAILABLE, EMPTY_QUERY, SCHEMA_ERROR, IO_ERROR
  gateway      PROVIDER_ERROR, TIMEOUT, LOGPROBS_UNSUPPORTED, EMPTY_TEXT,
               ENCODER_ERROR, CACHE_MISS
  prompts      MISSING_SLOT, UNKNOWN_TEMPLATE, MISSING_FACET, MISSING_KEY,
               NO_IDEA_SPAN, UNPARSEABLE_RESPONSE
  scoring      DIMENSION_MISMATCH, ZERO_VECTOR, EMPTY_CONTINUATION
  stages       EMPTY_FACETS, EMPTY_GAP, SCORE_COUNT_MISMATCH
  sessions     NOT_FOUND, SESSION_CLOSED, EMPTY_FEEDBACK
"""

from __future__ import annotations

from typing import Any


class ScideaError(Exception):
    """Operational error with a stable code and structured details."""

    def __init__(self, code: str, message: str, **details: Any) -> None:
        super().__init__(message)
        self.code = code
        self.message = message
        self.details = details

    def __repr__(self) -> str:
        return f"ScideaError({self.code!r}, {self.message!r}, details={self.details!r})"

    def to_payload(self) -> dict[str, Any]:
        """Wire shape used by the HTTP service error envelope."""
        return {"error": {"code": self.code, "message": self.message, "details": self.details}}
