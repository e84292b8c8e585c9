"""Lexer, parser and name resolution for ``.sct`` source files.

The grammar has one keyword per construct::

    type nat = z || s of nat
    reftype natref = ref nat with r = s(z)
    def dble(n : nat) : nat = match n with s(m) then s(s(dble(m))) else z
    beh f(x) = yield. read<i> i with l => g(x, l) | [_] => f(x)
    system = f(z)
    order f^ > g^
    qi s = x1 + 1

A read's branch list always ends with its mandatory default branch, so
nested reads and matches need no brackets.  ``order`` and ``qi`` lines are
kept as raw text and interpreted by the termination and quasi modules.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..lang import (
    Assign, Branch, Call, Cons, ConstructorSig, DuplicateDeclaration, FunctionDef,
    Match, Next, Program, Read, RegisterDecl, Span, Stop, TypeDecl, Var, Yield,
    body_children, reads_in, variables,
)
from .diagnostics import ERROR, WARNING, Diagnostic, DiagnosticError, has_errors

KEYWORDS = {
    "type", "reftype", "ref", "with", "of", "def", "beh", "stop", "yield", "next",
    "read", "match", "then", "else", "system",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*\^?)
  | (?P<op>:=|=>|\|\||[(),:=|\[\].<>])
    """,
    re.VERBOSE,
)

_RAW_LINE_RE = re.compile(r"^[ \t]*(order|qi)\b(.*)$")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | op | eof
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col)


class _Abort(Exception):
    pass


def _strip_raw_lines(text: str) -> tuple[str, list[tuple[str, str, int]]]:
    """Pull out ``order``/``qi`` lines, keeping line numbering intact."""
    raw = []
    lines = text.split("\n")
    for n, line in enumerate(lines):
        m = _RAW_LINE_RE.match(line)
        if m:
            body = m.group(2).split("#", 1)[0].strip()
            raw.append((m.group(1), body, n + 1))
            lines[n] = ""
    return "\n".join(lines), raw


def tokenize(text: str, diags: list[Diagnostic]) -> list[Token]:
    toks: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            diags.append(Diagnostic(ERROR, line, pos - line_start + 1,
                                    f"unexpected character {text[pos]!r}", "syntax"))
            pos += 1
            continue
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("ident", "op"):
            toks.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


# ---------------------------------------------------------------------------
# parser: produces lang nodes with unresolved names (bare names as Var,
# applications as Call); ``_Resolver`` fixes them up afterwards


class _Parser:
    def __init__(self, toks: list[Token], diags: list[Diagnostic]):
        self.toks = toks
        self.i = 0
        self.diags = diags

    # helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        self.diags.append(Diagnostic(ERROR, tok.line, tok.col, msg, "syntax"))
        raise _Abort

    def at(self, text: str) -> bool:
        return self.tok.kind != "eof" and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> Token:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            self.error(f"expected {what}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    # declarations
    def program(self):
        types, funcs, system = [], [], []
        while self.tok.kind != "eof":
            start = self.i
            try:
                if self.at("type"):
                    types.append(self.type_decl())
                elif self.at("reftype"):
                    types.append(self.reftype_decl())
                elif self.at("def") or self.at("beh"):
                    funcs.append(self.function_decl())
                elif self.at("system"):
                    self.i += 1
                    self.expect("=")
                    system.append(self.expr())
                    while self.accept(","):
                        system.append(self.expr())
                else:
                    self.error(f"expected a declaration, found {self.tok.text!r}")
            except _Abort:
                # resynchronise at the next declaration keyword
                self.i = max(self.i, start + 1)
                while self.tok.kind != "eof" and self.tok.text not in (
                        "type", "reftype", "def", "beh", "system"):
                    self.i += 1
        return types, funcs, system

    def type_decl(self) -> TypeDecl:
        self.expect("type")
        name = self.ident("type name").text
        self.expect("=")
        cons = [self.constructor_sig(name)]
        while self.accept("||"):
            cons.append(self.constructor_sig(name))
        return TypeDecl(name, tuple(cons))

    def constructor_sig(self, result: str) -> ConstructorSig:
        name = self.ident("constructor name").text
        args = []
        if self.accept("of"):
            if self.accept("("):
                args.append(self.ident("type name").text)
                while self.accept(","):
                    args.append(self.ident("type name").text)
                self.expect(")")
            else:
                args.append(self.ident("type name").text)
                while self.accept(","):
                    args.append(self.ident("type name").text)
        return ConstructorSig(name, tuple(args), result)

    def reftype_decl(self) -> TypeDecl:
        self.expect("reftype")
        name = self.ident("type name").text
        self.expect("=")
        self.expect("ref")
        referent = self.ident("type name").text
        self.expect("with")
        regs = [self.register_decl(name)]
        while self.accept("||"):
            regs.append(self.register_decl(name))
        return TypeDecl(name, (), referent, tuple(regs))

    def register_decl(self, reftype: str) -> RegisterDecl:
        name = self.ident("register name").text
        self.expect("=")
        return RegisterDecl(name, reftype, self.expr())

    def function_decl(self) -> FunctionDef:
        kw = self.tok
        behaviour = kw.text == "beh"
        self.i += 1
        name = self.ident("function name")
        if name.text.endswith("^"):
            self.error("function names may not end with '^'", name)
        self.expect("(")
        params, ptypes = [], []
        if not self.at(")"):
            while True:
                p = self.ident("parameter name")
                params.append(p.text)
                ptypes.append(self.ident("type name").text if self.accept(":") else None)
                if not self.accept(","):
                    break
        self.expect(")")
        ret = None
        if self.accept(":"):
            ret = self.ident("type name").text
        self.expect("=")
        body = self.behaviour() if behaviour else self.expr_body()
        if all(t is None for t in ptypes):
            ptypes = []
        return FunctionDef(name.text, tuple(params), tuple(ptypes), ret, body, behaviour, kw.span)

    # expressions
    def expr(self):
        t = self.ident("expression")
        if self.accept("("):
            args = []
            if not self.at(")"):
                args.append(self.expr())
                while self.accept(","):
                    args.append(self.expr())
            self.expect(")")
            return Call(t.text, tuple(args), t.span)
        return Var(t.text, t.span)

    def match_head(self):
        kw = self.expect("match")
        x = self.ident("variable")
        self.expect("with")
        pat = self.expr()
        self.expect("then")
        return kw, x, pat

    def expr_body(self):
        if self.at("("):
            self.i += 1
            b = self.expr_body()
            self.expect(")")
            return b
        if self.at("match"):
            kw, x, pat = self.match_head()
            then = self.expr_body()
            self.expect("else")
            orelse = self.expr_body()
            return Match(x.text, pat, then, orelse, kw.span)
        return self.expr()

    # behaviours
    def behaviour(self):
        t = self.tok
        if self.accept("("):
            b = self.behaviour()
            self.expect(")")
            return b
        if self.accept("stop"):
            return Stop(t.span)
        if self.accept("yield"):
            self.expect(".")
            return Yield(self.behaviour(), t.span)
        if self.accept("next"):
            self.expect(".")
            call = self.expr()
            if type(call) is not Call:
                self.error("'next.' must be followed by a function call", t)
            return Next(call, t.span)
        if self.at("match"):
            kw, x, pat = self.match_head()
            then = self.behaviour()
            self.expect("else")
            orelse = self.behaviour()
            return Match(x.text, pat, then, orelse, kw.span)
        if self.accept("read"):
            label = None
            if self.accept("<"):
                label = self.ident("label").text
                self.expect(">")
            target = self.ident("register or variable")
            self.expect("with")
            branches, default = [], None
            while True:
                if self.at("["):
                    self.i += 1
                    u = self.ident("'_'")
                    if u.text != "_":
                        self.error("expected '_' in default branch", u)
                    self.expect("]")
                    self.expect("=>")
                    default = self.expr()
                    if type(default) is not Call:
                        self.error("default branch must be a function call", u)
                    break
                pat = self.expr()
                self.expect("=>")
                branches.append(Branch(pat, self.behaviour()))
                if not self.accept("|"):
                    self.error("read is missing its default branch '[_] => f(...)'")
            return Read(Var(target.text, target.span), tuple(branches), default, label, t.span)
        if t.kind == "ident" and t.text not in KEYWORDS and self.peek().text == ":=":
            self.i += 2
            e = self.expr()
            self.expect(".")
            return Assign(Var(t.text, t.span), e, self.behaviour(), t.span)
        e = self.expr()
        if type(e) is not Call:
            self.error("expected a behaviour", t)
        return e


# ---------------------------------------------------------------------------
# name resolution


class _Resolver:
    def __init__(self, types, funcs, diags):
        self.diags = diags
        self.constructors = {c.name: c for t in types for c in t.constructors}
        self.constructors.update(
            {r.name: ConstructorSig(r.name, (), t.name) for t in types for r in t.registers})
        self.functions = {f.name: f for f in funcs}

    def err(self, span, msg, code):
        line, col = (span.line, span.col) if span else (0, 0)
        self.diags.append(Diagnostic(ERROR, line, col, msg, code))

    def warn(self, span, msg, code):
        line, col = (span.line, span.col) if span else (0, 0)
        self.diags.append(Diagnostic(WARNING, line, col, msg, code))

    def expr(self, e, scope: frozenset):
        if type(e) is Var:
            if e.name in scope:
                return e
            if e.name in self.constructors:
                return Cons(e.name, (), e.span)
            if e.name in self.functions:
                self.err(e.span, f"function {e.name} used without arguments", "arity")
            else:
                self.err(e.span, f"unknown symbol {e.name}", "unknown-symbol")
            return e
        args = tuple(self.expr(a, scope) for a in e.args)
        if e.name in self.constructors:
            return Cons(e.name, args, e.span)
        if e.name in self.functions:
            return Call(e.name, args, e.span)
        self.err(e.span, f"unknown symbol {e.name}", "unknown-symbol")
        return Call(e.name, args, e.span)

    def pattern(self, p):
        if type(p) is Var:
            if p.name in self.constructors:
                return Cons(p.name, (), p.span)
            return p
        if p.name not in self.constructors:
            self.err(p.span, f"unknown constructor {p.name} in pattern", "unknown-symbol")
        return Cons(p.name, tuple(self.pattern(a) for a in p.args), p.span)

    def target(self, t: Var, scope):
        if t.name in scope:
            return t
        if t.name in self.constructors:
            return Cons(t.name, (), t.span)
        self.err(t.span, f"unknown register {t.name}", "unknown-symbol")
        return t

    def body(self, b, scope: frozenset, behaviour: bool):
        tb = type(b)
        if tb in (Var, Call):
            return self.expr(b, scope)
        if tb is Match:
            pat = self.pattern(b.pattern)
            if b.var not in scope:
                self.err(b.span, f"match on unbound variable {b.var}", "unknown-symbol")
            if type(pat) is Var:
                self.err(b.span, "match pattern must be a constructor pattern", "pattern")
                pat = Cons("?", ())
            ys = frozenset(variables(pat))
            # the else branch sees the pattern variables lexically so the
            # checker can report scope violations precisely
            return Match(b.var, pat, self.body(b.then, scope | ys, behaviour),
                         self.body(b.orelse, scope | ys, behaviour), b.span)
        if tb is Stop:
            return b
        if tb is Yield:
            return Yield(self.body(b.body, scope, True), b.span)
        if tb is Next:
            return Next(self.expr(b.call, scope), b.span)
        if tb is Assign:
            return Assign(self.target(b.target, scope), self.expr(b.expr, scope),
                          self.body(b.body, scope, True), b.span)
        if tb is Read:
            branches = []
            for br in b.branches:
                pat = self.pattern(br.pattern)
                branches.append(Branch(pat, self.body(br.body, scope | frozenset(variables(pat)), True)))
                if type(pat) is Var and br is not b.branches[-1]:
                    self.warn(b.span, f"branches after variable pattern {pat.name} are unreachable; dropped",
                              "dead-branch")
                    break
            return Read(self.target(b.target, scope), tuple(branches),
                        self.expr(b.default, scope), b.label, b.span)
        raise TypeError(b)


def _assign_labels(funcs: list[FunctionDef], diags) -> list[FunctionDef]:
    """Give every unlabelled read a fresh label in source order."""
    used: set[str] = set()

    def collect(b):
        stack = [b]
        while stack:
            u = stack.pop()
            if type(u) is Match:
                used.add(u.var)
                used.update(variables(u.pattern))
            elif type(u) is Read:
                for br in u.branches:
                    used.update(variables(br.pattern))
                used.update(variables(u.target))
            elif type(u) in (Var, Cons, Call):
                used.update(variables(u))
            stack.extend(body_children(u))

    explicit: dict[str, Span] = {}
    for f in funcs:
        used.update(f.params)
        collect(f.body)
        for r in reads_in(f.body):
            if r.label is not None:
                if r.label in used:
                    diags.append(Diagnostic(ERROR, r.span.line, r.span.col,
                                            f"label {r.label} clashes with a variable", "label"))
                if r.label in explicit:
                    diags.append(Diagnostic(ERROR, r.span.line, r.span.col,
                                            f"label {r.label} used twice", "duplicate"))
                explicit[r.label] = r.span
    taken = used | set(explicit)
    counter = [0]

    def fresh():
        while True:
            counter[0] += 1
            cand = f"y{counter[0]}"
            if cand not in taken:
                taken.add(cand)
                return cand

    def relabel(b):
        t = type(b)
        if t is Read:
            return Read(b.target, tuple(Branch(br.pattern, relabel(br.body)) for br in b.branches),
                        b.default, b.label if b.label is not None else fresh(), b.span)
        if t is Match:
            return Match(b.var, b.pattern, relabel(b.then), relabel(b.orelse), b.span)
        if t is Yield:
            return Yield(relabel(b.body), b.span)
        if t is Assign:
            return Assign(b.target, b.expr, relabel(b.body), b.span)
        return b

    return [FunctionDef(f.name, f.params, f.param_types, f.ret, relabel(f.body), f.behaviour, f.span)
            if f.behaviour else f for f in funcs]


def parse_with_diagnostics(text: str) -> tuple[Optional[Program], list[Diagnostic]]:
    """Parse and resolve names.  Returns ``(program or None, diagnostics)``."""
    diags: list[Diagnostic] = []
    stripped, raw = _strip_raw_lines(text)
    toks = tokenize(stripped, diags)
    parser = _Parser(toks, diags)
    types, funcs, system = parser.program()
    if has_errors(diags):
        return None, diags
    resolver = _Resolver(types, funcs, diags)
    rtypes = []
    for t in types:
        regs = tuple(RegisterDecl(r.name, r.reftype, resolver.expr(r.default, frozenset()))
                     for r in t.registers)
        rtypes.append(TypeDecl(t.name, t.constructors, t.referent, regs))
    rfuncs = [FunctionDef(f.name, f.params, f.param_types, f.ret,
                          resolver.body(f.body, frozenset(f.params), f.behaviour),
                          f.behaviour, f.span) for f in funcs]
    rsystem = tuple(resolver.expr(c, frozenset()) for c in system)
    rfuncs = _assign_labels(rfuncs, diags)
    orders = tuple(body for kind, body, _ in raw if kind == "order")
    qis = tuple(body for kind, body, _ in raw if kind == "qi")
    if has_errors(diags):
        return None, diags
    try:
        prog = Program(tuple(rtypes), tuple(rfuncs), rsystem, orders, qis)
    except DuplicateDeclaration as exc:
        diags.append(Diagnostic(ERROR, 1, 1, str(exc), "duplicate"))
        return None, diags
    return prog, diags


def parse(text: str) -> Program:
    """Parse source text, raising :class:`DiagnosticError` on any error."""
    prog, diags = parse_with_diagnostics(text)
    if prog is None:
        raise DiagnosticError(diags)
    return prog
