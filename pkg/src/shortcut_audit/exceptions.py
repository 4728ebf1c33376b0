"""
Exception hierarchy for shortcut-audit.

The CLI maps InputValidationError (and subclasses) to exit code 2 and every
other error to exit code 1.
"""

from typing import Optional, Union
from pathlib import Path


class ShortcutAuditError(Exception):
    """Base class for all shortcut-audit errors."""


class InputValidationError(ShortcutAuditError, ValueError):
    """
    Malformed input: a bad file, row, flag or parameter.

    Args:
        message: Human readable description
        path: Offending file, when known
        line: 1-based line number in that file, when known
        column: Offending column name, when known
    """

    def __init__(
        self,
        message: str,
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
        column: Optional[str] = None,
    ):
        self.path = str(path) if path is not None else None
        self.line = line
        self.column = column
        location = ""
        if self.path is not None:
            location = self.path
            if line is not None:
                location += f":{line}"
            location += ": "
        elif line is not None:
            location = f"line {line}: "
        if column is not None:
            location += f"column '{column}': "
        super().__init__(f"{location}{message}")


class SchemaViolationError(InputValidationError):
    """Exams do not conform to the declared AttributeSchema."""

    def __init__(self, message: str, violations: Optional[list] = None, path=None):
        self.violations = violations or []
        super().__init__(message, path=path)


class UndefinedMetricError(ShortcutAuditError):
    """A statistic is undefined on its input (empty sample, single class)."""


class SamplingError(ShortcutAuditError):
    """A resampling or simulation request cannot be satisfied."""
