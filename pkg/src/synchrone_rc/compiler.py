"""Compilation of checked programs to bytecode.

The compiler keeps a static image ``eta`` of the stack: the source variable
held by each slot, bottom first.  Variables are addressed by the rightmost
slot that holds them.
"""

from __future__ import annotations

from .bytecode import BytecodeProgram, Instruction, Segment
from .interpreter import eval_expr
from .lang import (
    BEH, Assign, Call, Cons, FunctionDef, Match, Next, Program, Read, Stop, Var, Yield,
)


class CompileError(ValueError):
    pass


def var_index(x: str, eta: list) -> int:
    """1-based index of the rightmost slot holding ``x``."""
    for i in range(len(eta) - 1, -1, -1):
        if eta[i] == x:
            return i + 1
    raise CompileError(f"variable {x} is not on the stack {eta}")


class _Emitter:
    def __init__(self, prog: Program):
        self.prog = prog
        self.code: list = []

    def emit(self, op: str, a=None, b=None) -> int:
        self.code.append([op, a, b])
        return len(self.code)  # 1-based index of the new instruction

    def here(self) -> int:
        return len(self.code) + 1

    # C'(e, eta): push the value of e
    def expr(self, e, eta: list) -> None:
        t = type(e)
        if t is Var:
            self.emit("load", var_index(e.name, eta))
        elif t is Cons:
            for a in e.args:
                self.expr(a, eta)
            self.emit("build", e.name, len(e.args))
        elif t is Call:
            for a in e.args:
                self.expr(a, eta)
            self.emit("call", e.name, len(e.args))
        else:
            raise CompileError(f"not an expression: {e!r}")

    def match(self, m: Match, eta: list, body) -> None:
        c = m.pattern.name
        ys = [y.name for y in m.pattern.args]
        if eta and eta[-1] == m.var:
            br = self.emit("branch", c, None)
            body(m.then, eta[:-1] + ys)
            self.code[br - 1][2] = self.here()
            body(m.orelse, eta)
        else:
            self.emit("load", var_index(m.var, eta))
            br = self.emit("branch", c, None)
            body(m.then, eta + ys)
            self.code[br - 1][2] = self.here()
            body(m.orelse, eta + [m.var])

    # C(eb, eta) for expression bodies
    def expr_body(self, eb, eta: list) -> None:
        if type(eb) is Match:
            self.match(eb, eta, self.expr_body)
        else:
            self.expr(eb, eta)
            self.emit("return")

    def _ref(self, target, eta: list):
        return target.name if type(target) is Cons else var_index(target.name, eta)

    # C(b, eta) for behaviours
    def beh(self, b, eta: list) -> None:
        t = type(b)
        if t is Stop:
            self.emit("stop")
        elif t is Call:
            for a in b.args:
                self.expr(a, eta)
            self.emit("tcall", b.name, len(b.args))
        elif t is Yield:
            self.emit("yield")
            self.beh(b.body, eta)
        elif t is Next:
            self.emit("next")
            self.beh(b.call, eta)
        elif t is Assign:
            self.expr(b.expr, eta)
            self.emit("write", self._ref(b.target, eta))
            self.beh(b.body, eta)
        elif t is Match:
            self.match(b, eta, self.beh)
        elif t is Read:
            j0 = self.emit("read", self._ref(b.target, eta))
            for br in b.branches:
                p = br.pattern
                if type(p) is Var:
                    # a variable pattern always matches: no wait, no default
                    self.beh(br.body, eta + [p.name])
                    return
                k = self.emit("branch", p.name, None)
                self.beh(br.body, eta + [y.name for y in p.args])
                self.code[k - 1][2] = self.here()
            self.emit("wait", j0)
            self.beh(b.default, eta)
        else:
            raise CompileError(f"not a behaviour: {b!r}")


def compile_function(prog: Program, f: FunctionDef) -> Segment:
    em = _Emitter(prog)
    eta = list(f.params)
    if f.behaviour:
        em.beh(f.body, eta)
    else:
        em.expr_body(f.body, eta)
    code = tuple(Instruction(op, a, b) if b is not None else Instruction(op, a) if a is not None
                 else Instruction(op) for op, a, b in em.code)
    ret = BEH if f.behaviour else f.ret
    return Segment(f.name, len(f.params), tuple(f.param_types), ret, code)


def compile_program(prog: Program) -> BytecodeProgram:
    segs = tuple(compile_function(prog, f) for f in prog.functions)
    system = tuple((c.name, tuple(eval_expr(prog, a) for a in c.args)) for c in prog.system)
    return BytecodeProgram(prog.types, segs, system)


__all__ = ["CompileError", "compile_function", "compile_program", "var_index"]
