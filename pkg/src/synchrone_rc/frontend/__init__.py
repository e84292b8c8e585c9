from .checker import TypedProgram, signature, typecheck
from .diagnostics import Diagnostic, DiagnosticError
from .printer import pretty
from .syntax import parse, parse_with_diagnostics


def load(text: str) -> TypedProgram:
    """Parse and typecheck in one go."""
    return typecheck(parse(text))


def load_file(path) -> TypedProgram:
    with open(path, encoding="utf-8") as fh:
        return load(fh.read())


__all__ = [
    "Diagnostic", "DiagnosticError", "TypedProgram", "load", "load_file", "parse",
    "parse_with_diagnostics", "pretty", "signature", "typecheck",
]
