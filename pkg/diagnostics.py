#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Diagnostics shared by every stage of the mlproc pipeline.

- SourceSpan / Diagnostic: the single currency of parse and validation results.
- RULES: the published rule table (code -> severity + title).
- MlprocError and friends: exceptions raised when an operation's
  precondition does not hold.

Rendering format (stable, grep-able in CI):
    <file>:<line>:<col>: <severity> <code>: <message>
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class SourceSpan:
    """Byte range in the source text plus the 1-based position of its start."""
    byte_start: int
    byte_end: int
    line: int
    column: int

    def __post_init__(self):
        if self.byte_start > self.byte_end:
            raise ValueError(f"span start {self.byte_start} after end {self.byte_end}")


# ----------------------- Rule table -----------------------

RULES: Dict[str, Tuple[Severity, str]] = {
    # lexing / parsing
    "P001": (Severity.ERROR, "unterminated string"),
    "P002": (Severity.ERROR, "invalid character"),
    "P010": (Severity.ERROR, "unexpected token"),
    "P011": (Severity.ERROR, "unknown kind"),
    "P012": (Severity.ERROR, "duplicate attribute in block"),
    "P013": (Severity.ERROR, "missing mandatory attribute"),
    "P020": (Severity.ERROR, "cannot print a tree holding error placeholders"),
    # resolution
    "R001": (Severity.ERROR, "duplicate identifier"),
    "R002": (Severity.ERROR, "unresolved reference"),
    "R003": (Severity.ERROR, "reference to the wrong element family"),
    # validation
    "R004": (Severity.ERROR, "flow endpoints are not siblings"),
    "R005": (Severity.ERROR, "flow cycle within a container"),
    "R006": (Severity.ERROR, "participant does not reference a role"),
    "R007": (Severity.ERROR, "criterion baseline/target fail the dataType check"),
    "R008": (Severity.ERROR, "metric minThreshold greater than maxThreshold"),
    "R009": (Severity.ERROR, "payload on the wrong activity kind"),
    "R010": (Severity.ERROR, "flaw relatedTo is not an AIModelRequirement"),
    "R011": (Severity.WARNING, "requiresAll on a leaf activity"),
    "R012": (Severity.WARNING, "data identification without selected data sources"),
    "R013": (Severity.WARNING, "evaluation without a Test dataset input"),
    "R014": (Severity.WARNING, "optional sole producer of an artifact a mandatory activity consumes"),
    "R015": (Severity.ERROR, "ranking is not a positive integer"),
    "R016": (Severity.ERROR, "success criterion evaluates a goal of the other family"),
    "R017": (Severity.ERROR, "empty statement or name"),
}


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    span: Optional[SourceSpan] = None
    # offending element id; flows use "a->b", cycles "a,b,c"
    subject: Optional[str] = None

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def render(self, file_name: str = "<input>") -> str:
        line, col = (self.span.line, self.span.column) if self.span else (0, 0)
        return f"{file_name}:{line}:{col}: {self.severity.value} {self.code}: {self.message}"


def make(code: str, message: str, span: Optional[SourceSpan] = None,
         subject: Optional[str] = None) -> Diagnostic:
    """Build a diagnostic whose severity comes from the rule table."""
    severity, _ = RULES[code]
    return Diagnostic(severity=severity, code=code, message=message, span=span, subject=subject)


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)


def sort_key(diagnostic: Diagnostic) -> Tuple[str, int, str, str]:
    start = diagnostic.span.byte_start if diagnostic.span else -1
    return (diagnostic.code, start, diagnostic.subject or "", diagnostic.message)


def render_all(diagnostics: Sequence[Diagnostic], file_name: str = "<input>") -> List[str]:
    return [d.render(file_name) for d in diagnostics]


# ----------------------- Exceptions -----------------------

class MlprocError(Exception):
    """Base error; `code` is a rule-table style code (E001, N004, ...)."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


class UnknownElementError(MlprocError, KeyError):
    def __init__(self, element_id: str):
        super().__init__("M001", f"no element with id '{element_id}'")
        self.element_id = element_id

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class CycleError(MlprocError):
    def __init__(self, cycle: Sequence[str]):
        super().__init__("R005", "flow cycle through " + " -> ".join(cycle))
        self.cycle = list(cycle)


class PrintError(MlprocError):
    pass


class ExportError(MlprocError):
    pass


class DocgenError(MlprocError):
    pass


class EnactmentError(MlprocError):
    pass


class TraceError(MlprocError):
    """Replay found an illegal transition; `seq` is the first offending event."""

    def __init__(self, seq: int, message: str):
        super().__init__("N010", f"illegal transition at seq {seq}: {message}")
        self.seq = seq
