"""Bytecode instructions, code segments and the ``.sbc`` text format.

A file lists type declarations (source syntax), then one segment per
function::

    func alarm/2 : nat, nat -> beh
    1: branch s 12
    2: read sig
    ...

and finally the initial threads, ``system = alarm(s(s(z)), s(s(z)))``.
Instruction indexes are 1-based.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .lang import BEH, Cons, ConstructorSig, Program, TypeDecl

# mnemonic -> operand kinds: "c" constructor, "g" function, "n" count,
# "j" jump target, "k" stack index, "rk" register name or stack index
OPCODES = {
    "load": ("k",),
    "branch": ("c", "j"),
    "build": ("c", "n"),
    "call": ("g", "n"),
    "tcall": ("g", "n"),
    "return": (),
    "read": ("rk",),
    "write": ("rk",),
    "stop": (),
    "yield": (),
    "next": (),
    "wait": ("j",),
}
TERMINATORS = {"return", "stop", "tcall"}


@dataclass(frozen=True)
class Instruction:
    op: str
    a: Union[str, int, None] = None
    b: Optional[int] = None

    def __post_init__(self) -> None:
        if self.op not in OPCODES:
            raise ValueError(f"unknown instruction {self.op!r}")
        kinds = OPCODES[self.op]
        given = [x for x in (self.a, self.b) if x is not None]
        if len(given) != len(kinds):
            raise ValueError(f"{self.op} takes {len(kinds)} operand(s)")

    @property
    def operands(self) -> tuple:
        return tuple(x for x in (self.a, self.b) if x is not None)

    def __str__(self) -> str:
        return " ".join([self.op, *map(str, self.operands)])


def load(k: int) -> Instruction:
    return Instruction("load", k)


@dataclass(frozen=True)
class Segment:
    name: str
    arity: int
    param_types: tuple
    ret: str  # a type name, or "beh"
    code: tuple

    @property
    def behaviour(self) -> bool:
        return self.ret == BEH

    def __len__(self) -> int:
        return len(self.code)

    def at(self, i: int) -> Instruction:
        """Instruction ``f[i]`` (1-based)."""
        return self.code[i - 1]

    def render(self) -> str:
        head = f"func {self.name}/{self.arity} : {', '.join(self.param_types)} -> {self.ret}"
        head = head.replace(":  ->", ": ->")
        lines = [head] + [f"{i}: {ins}" for i, ins in enumerate(self.code, 1)]
        return "\n".join(lines) + "\n"


class BytecodeError(ValueError):
    pass


@dataclass(frozen=True)
class BytecodeProgram:
    types: tuple
    segments: tuple
    system: tuple = ()  # ((function, (values...)), ...)

    @property
    def segment_map(self) -> dict:
        return {s.name: s for s in self.segments}

    @property
    def constructors(self) -> dict:
        return Program(self.types, ()).constructors

    @property
    def registers(self) -> dict:
        return {r.name: r for t in self.types for r in t.registers}

    def referent(self, reftype: str) -> Optional[str]:
        for t in self.types:
            if t.name == reftype:
                return t.referent
        return None

    def initial_store(self) -> dict:
        return {r.name: r.default for t in self.types for r in t.registers}

    def render(self) -> str:
        from .frontend.printer import show_type

        out = [show_type(t) for t in self.types]
        for s in self.segments:
            out.append("")
            out.append(s.render().rstrip("\n"))
        if self.system:
            out.append("")
            out.append("system = " + ", ".join(
                f"{f}({', '.join(map(str, args))})" for f, args in self.system))
        return "\n".join(out) + "\n"

    def validate(self) -> list[str]:
        """Structural problems: bad terminators, jump targets, unknown symbols."""
        errs = []
        cons = self.constructors
        segs = self.segment_map
        regs = self.registers
        for s in self.segments:
            if not s.code:
                errs.append(f"{s.name}: empty segment")
                continue
            if s.code[-1].op not in TERMINATORS:
                errs.append(f"{s.name}: last instruction must be return, stop or tcall")
            for i, ins in enumerate(s.code, 1):
                where = f"{s.name}[{i}]"
                if ins.op in ("branch", "wait"):
                    j = ins.b if ins.op == "branch" else ins.a
                    if not 1 <= j <= len(s.code):
                        errs.append(f"{where}: jump target {j} outside the segment")
                if ins.op in ("branch", "build") and ins.a not in cons:
                    errs.append(f"{where}: unknown constructor {ins.a}")
                if ins.op == "build" and ins.a in cons and cons[ins.a].arity != ins.b:
                    errs.append(f"{where}: {ins.a} has arity {cons[ins.a].arity}")
                if ins.op in ("call", "tcall") and ins.a not in segs:
                    errs.append(f"{where}: unknown function {ins.a}")
                if ins.op in ("read", "write") and isinstance(ins.a, str) and ins.a not in regs:
                    errs.append(f"{where}: unknown register {ins.a}")
                if ins.op in ("load", "read", "write") and isinstance(ins.a, int) and ins.a < 1:
                    errs.append(f"{where}: index must be positive")
        return errs


# ---------------------------------------------------------------------------
# parsing


_HEADER = re.compile(r"^func\s+([A-Za-z_][A-Za-z0-9_']*)/(\d+)\s*:\s*(.*?)\s*->\s*([A-Za-z_][A-Za-z0-9_']*)\s*$")
_INSTR = re.compile(r"^(\d+)\s*:\s*([a-z]+)((?:\s+\S+)*)\s*$")
_VALUE_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_']*|[(),])")


def _int(tok: str, what: str, lineno: int) -> int:
    if not re.fullmatch(r"\d+", tok):
        raise BytecodeError(f"line {lineno}: expected {what}, got {tok!r}")
    return int(tok)


def parse_instruction(text: str, lineno: int = 0) -> Instruction:
    parts = text.split()
    if not parts or parts[0] not in OPCODES:
        raise BytecodeError(f"line {lineno}: unknown instruction {text!r}")
    op, args = parts[0], parts[1:]
    kinds = OPCODES[op]
    if len(args) != len(kinds):
        raise BytecodeError(f"line {lineno}: {op} takes {len(kinds)} operand(s)")
    vals = []
    for kind, tok in zip(kinds, args):
        if kind in ("k", "n", "j"):
            vals.append(_int(tok, "a number", lineno))
        elif kind == "rk":
            vals.append(int(tok) if tok.isdigit() else tok)
        else:
            vals.append(tok)
    return Instruction(op, *vals)


def parse_value(text: str, constructors: dict) -> Cons:
    toks = []
    i = 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        m = _VALUE_TOKEN.match(text, i)
        if not m:
            raise BytecodeError(f"bad value {text!r}")
        toks.append(m.group(1))
        i = m.end()
    k = 0

    def term() -> Cons:
        nonlocal k
        name = toks[k]
        k += 1
        if name not in constructors:
            raise BytecodeError(f"unknown constructor {name!r}")
        args = []
        if k < len(toks) and toks[k] == "(":
            k += 1
            while True:
                args.append(term())
                if toks[k] == ",":
                    k += 1
                    continue
                if toks[k] == ")":
                    k += 1
                    break
                raise BytecodeError(f"bad value {text!r}")
        if len(args) != constructors[name].arity:
            raise BytecodeError(f"{name} expects {constructors[name].arity} argument(s)")
        return Cons(name, tuple(args))

    try:
        v = term()
    except IndexError:
        raise BytecodeError(f"truncated value {text!r}") from None
    if k != len(toks):
        raise BytecodeError(f"trailing input in value {text!r}")
    return v


def _split_top(text: str) -> list[str]:
    """Split on commas at parenthesis depth 0."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur.append(ch)
    if "".join(cur).strip():
        out.append("".join(cur))
    return [x.strip() for x in out]


def parse_bytecode(text: str) -> BytecodeProgram:
    from .frontend.syntax import parse_with_diagnostics

    type_lines: list[str] = []
    segments: list = []
    current = None
    system_text = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        s = line.strip()
        if s.startswith(("type ", "reftype ")):
            type_lines.append(s)
            continue
        if s.startswith("system"):
            system_text = s.partition("=")[2]
            current = None
            continue
        m = _HEADER.match(s)
        if m:
            name, arity, params, ret = m.groups()
            ptypes = tuple(p.strip() for p in params.split(",") if p.strip())
            if len(ptypes) != int(arity):
                raise BytecodeError(f"line {lineno}: {name}/{arity} lists {len(ptypes)} parameter type(s)")
            current = [name, int(arity), ptypes, ret, []]
            segments.append(current)
            continue
        m = _INSTR.match(s)
        if m and current is not None:
            idx = int(m.group(1))
            if idx != len(current[4]) + 1:
                raise BytecodeError(f"line {lineno}: expected instruction {len(current[4]) + 1}, got {idx}")
            current[4].append(parse_instruction(m.group(2) + m.group(3), lineno))
            continue
        raise BytecodeError(f"line {lineno}: cannot parse {s!r}")
    prog, diags = parse_with_diagnostics("\n".join(type_lines) + "\n")
    if prog is None:
        raise BytecodeError("bad type declarations: " + "; ".join(d.message for d in diags))
    types = prog.types
    cons = Program(types, ()).constructors
    system = []
    if system_text is not None:
        for call in _split_top(system_text):
            m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_']*)\s*\((.*)\)", call, re.S)
            if not m:
                raise BytecodeError(f"bad thread {call!r}")
            args = tuple(parse_value(a, cons) for a in _split_top(m.group(2)))
            system.append((m.group(1), args))
    segs = tuple(Segment(n, a, p, r, tuple(code)) for n, a, p, r, code in segments)
    bp = BytecodeProgram(types, segs, tuple(system))
    errs = bp.validate()
    if errs:
        raise BytecodeError("; ".join(errs))
    return bp


def constructor_sig(bp: BytecodeProgram, name: str) -> ConstructorSig:
    return bp.constructors[name]


__all__ = [
    "BytecodeError", "BytecodeProgram", "Instruction", "OPCODES", "Segment", "TERMINATORS",
    "TypeDecl", "parse_bytecode", "parse_instruction", "parse_value",
]
