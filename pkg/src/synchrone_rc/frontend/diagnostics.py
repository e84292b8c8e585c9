from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    line: int
    col: int
    message: str
    code: str

    def render(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.severity}: {self.message} [{self.code}]"

    def to_json(self, filename: Optional[str] = None) -> str:
        rec = asdict(self)
        if filename is not None:
            rec["file"] = filename
        return json.dumps(rec, sort_keys=True)


class DiagnosticError(Exception):
    """Raised when a stage produced at least one error diagnostic."""

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        self.diagnostics = list(diagnostics)
        first = next((d for d in self.diagnostics if d.severity == ERROR), None)
        super().__init__(first.render() if first else "diagnostics")

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics if d.severity == ERROR]


def has_errors(diags: Iterable[Diagnostic]) -> bool:
    return any(d.severity == ERROR for d in diags)
