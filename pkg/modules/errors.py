"""
Error hierarchy.

Every failure the library can report is a BoundaryError subclass carrying a
machine-readable `code` and the process `exit_status` the CLI uses:

  0  success
  1  usage, parse or validation error
  2  a hypothesis of the construction fails (not proper, not malnormal, ...)
  3  a resource cap or horizon was hit
"""

from typing import Any

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_HYPOTHESIS = 2
EXIT_RESOURCE = 3


class BoundaryError(Exception):
    code = "ERROR"
    exit_status = EXIT_USAGE

    def __init__(self, message: str, **detail: Any) -> None:
        super().__init__(message)
        self.message = message
        self.detail = detail

    def to_dict(self) -> dict[str, Any]:
        detail = {
            k: (v.to_dict() if hasattr(v, "to_dict") else v)
            for k, v in self.detail.items()
        }
        return {"code": self.code, "message": self.message, "detail": detail}


# ── word-core ────────────────────────────────────────────────────────────────

class UnknownLetterError(BoundaryError):
    code = "UNKNOWN_LETTER"


class ResourceLimitError(BoundaryError):
    code = "RESOURCE_LIMIT"
    exit_status = EXIT_RESOURCE


# ── subgroups ────────────────────────────────────────────────────────────────

class TrivialSubgroupError(BoundaryError):
    code = "TRIVIAL_SUBGROUP"
    exit_status = EXIT_HYPOTHESIS


class NotProperError(BoundaryError):
    code = "NOT_PROPER"
    exit_status = EXIT_HYPOTHESIS


class EmptyCollectionError(BoundaryError):
    code = "EMPTY_COLLECTION"
    exit_status = EXIT_HYPOTHESIS


class CosetEqualError(BoundaryError):
    code = "COSET_EQUAL"
    exit_status = EXIT_HYPOTHESIS


class NotMalnormalError(BoundaryError):
    """Raised with the negative MalnormalityCertificate as `certificate`."""

    code = "NOT_MALNORMAL"
    exit_status = EXIT_HYPOTHESIS


# ── dynamics ─────────────────────────────────────────────────────────────────

class BadCompactsError(BoundaryError):
    code = "BAD_COMPACTS"
    exit_status = EXIT_HYPOTHESIS


class NotConicalCandidateError(BoundaryError):
    code = "NOT_CONICAL_CANDIDATE"
    exit_status = EXIT_HYPOTHESIS


class HorizonError(BoundaryError):
    code = "HORIZON"
    exit_status = EXIT_RESOURCE


class BadRError(BoundaryError):
    code = "BAD_R"
    exit_status = EXIT_HYPOTHESIS


# ── cli-io ───────────────────────────────────────────────────────────────────

class ParseError(BoundaryError):
    code = "PARSE_ERROR"

    def __init__(self, message: str, line: int | None = None, field: str | None = None) -> None:
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}", line=line, field=field)
        self.line = line
        self.field = field


class ValidationError(BoundaryError):
    code = "VALIDATION_ERROR"
