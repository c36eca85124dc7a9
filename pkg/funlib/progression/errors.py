"""Exceptions raised by funlib.progression.

Every exception derives from :class:`ProgressionError` and from the builtin
that best describes it, so ``except ValueError`` keeps working for callers
that do not know about this module. ``exit_code`` is used by the command line
interface to map failures to distinct process exit statuses.
"""

from typing import Optional


class ProgressionError(Exception):
    exit_code = 1

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "exit_code": self.exit_code,
        }


class ArgumentError(ProgressionError, ValueError):
    exit_code = 2


class CohortFormatError(ProgressionError, ValueError):
    """A cohort file could not be parsed. ``row`` is the 1-based line (CSV) or
    the record index (JSON) and ``column`` the offending column, where known.
    """

    exit_code = 3

    def __init__(
        self, message: str, row: Optional[int] = None, column: Optional[str] = None
    ):
        locus = []
        if row is not None:
            locus.append("row %d" % row)
        if column is not None:
            locus.append("column %r" % column)
        if locus:
            message = "%s (%s)" % (message, ", ".join(locus))
        super().__init__(message)
        self.row = row
        self.column = column

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["row"] = self.row
        d["column"] = self.column
        return d


class CohortSchemaError(ProgressionError, ValueError):
    exit_code = 4


class CohortValidationError(ProgressionError, ValueError):
    exit_code = 5


class MixtureFitError(ProgressionError, RuntimeError):
    exit_code = 6


class EmbeddingError(ProgressionError, RuntimeError):
    """A transition matrix has no real matrix logarithm, so it cannot be
    evaluated over a non-integer number of base intervals."""

    exit_code = 7


class TimelineError(ProgressionError, RuntimeError):
    exit_code = 8


class DegenerateEmissionError(ProgressionError, RuntimeError):
    exit_code = 9

    def __init__(
        self,
        message: str,
        individual: Optional[int] = None,
        visit: Optional[int] = None,
    ):
        super().__init__(message)
        self.individual = individual
        self.visit = visit

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["individual"] = self.individual
        d["visit"] = self.visit
        return d


class BaselineFitError(ProgressionError, RuntimeError):
    exit_code = 10


class EvaluationError(ProgressionError, RuntimeError):
    exit_code = 11


class ConfigError(ProgressionError, ValueError):
    exit_code = 12


class ModelFormatError(ProgressionError, ValueError):
    exit_code = 13
