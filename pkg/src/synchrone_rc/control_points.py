"""Control points of function definitions and the order constraints they induce.

A control point ``(head, cont, flag)`` records that a call matching ``head``
may reach the continuation ``cont``.  Behaviour heads use the hatted symbol
``f^`` whose extra parameters are the read labels reachable from ``f``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .cfa import CallGraph
from .frontend.printer import show_body
from .lang import (
    Assign, Call, FunctionDef, Match, Next, Program, Read, Stop, Var, Yield, apply_subst,
    free_vars, hat, variables,
)


@dataclass(frozen=True)
class ControlPoint:
    head: Call
    cont: object
    flag: int

    def __post_init__(self) -> None:
        missing = free_vars(self.cont) - set(variables(self.head))
        if missing:
            raise ValueError(f"control point {self.head}: free variables {sorted(missing)} not in head")

    def __str__(self) -> str:
        return f"({self.head}, {one_line(self.cont)}, {self.flag})"


@dataclass(frozen=True)
class Constraint:
    lhs: Call
    rhs: object
    index: int

    def __str__(self) -> str:
        return f"{self.lhs} >{self.index} {self.rhs}"


def one_line(b) -> str:
    return re.sub(r"\s+", " ", show_body(b)).strip()


def _with(p: tuple, x: str, t) -> tuple:
    sigma = {x: t}
    return tuple(apply_subst(sigma, a) for a in p)


def _expr_points(f: str, p: tuple, eb, out: list) -> None:
    if type(eb) is Match:
        out.append(ControlPoint(Call(f, p), eb, 2))
        _expr_points(f, _with(p, eb.var, eb.pattern), eb.then, out)
        _expr_points(f, p, eb.orelse, out)
    else:
        out.append(ControlPoint(Call(f, p), eb, 0))


def _beh_points(fh: str, p: tuple, b, out: list) -> None:
    head = Call(fh, p)
    t = type(b)
    if t is Stop:
        out.append(ControlPoint(head, b, 2))
    elif t is Call:
        out.append(ControlPoint(head, b, 0))
    elif t is Yield:
        out.append(ControlPoint(head, b, 2))
        _beh_points(fh, p, b.body, out)
    elif t is Next:
        out.append(ControlPoint(head, b, 2))
        out.append(ControlPoint(head, b.call, 2))
    elif t is Assign:
        out.append(ControlPoint(head, b, 2))
        out.append(ControlPoint(head, b.expr, 1))
        _beh_points(fh, p, b.body, out)
    elif t is Match:
        out.append(ControlPoint(head, b, 2))
        _beh_points(fh, _with(p, b.var, b.pattern), b.then, out)
        _beh_points(fh, p, b.orelse, out)
    elif t is Read:
        out.append(ControlPoint(head, b, 2))
        out.append(ControlPoint(head, b.default, 2))
        for br in b.branches:
            _beh_points(fh, _with(p, b.label, br.pattern), br.body, out)
    else:
        raise TypeError(f"not a behaviour: {b!r}")


def control_points(f: FunctionDef, cg: CallGraph) -> list[ControlPoint]:
    """Control points of ``f`` in generation order (duplicates removed)."""
    out: list[ControlPoint] = []
    params = tuple(Var(x) for x in f.params)
    if f.behaviour:
        labels = tuple(Var(y) for y in cg.yhat(f.name))
        _beh_points(hat(f.name), params + labels, f.body, out)
    else:
        _expr_points(f.name, params, f.body, out)
    return list(dict.fromkeys(out))


def program_control_points(prog: Program, cg: CallGraph) -> list[ControlPoint]:
    out = []
    for f in prog.functions:
        out.extend(control_points(f, cg))
    return out


def constraints(cps: Iterable[ControlPoint], cg: CallGraph) -> list[Constraint]:
    """Constraints of index 0 and 1; the ``g^`` label arguments are the label
    variables themselves."""
    out = []
    for cp in cps:
        if cp.flag == 2:
            continue
        if cp.flag == 1:
            out.append(Constraint(cp.head, cp.cont, 1))
        elif type(cp.cont) is Call and cp.cont.name in cg.graph:
            g = cp.cont
            extra = tuple(Var(y) for y in cg.yhat(g.name))
            out.append(Constraint(cp.head, Call(hat(g.name), tuple(g.args) + extra), 0))
        else:
            out.append(Constraint(cp.head, cp.cont, 0))
    return list(dict.fromkeys(out))


def canonical(c: Constraint) -> Constraint:
    """Rename variables to v1, v2, ... by first occurrence in the lhs, then rhs."""
    names = variables(c.lhs)
    for x in variables(c.rhs):
        if x not in names:
            names.append(x)
    sigma = {x: Var(f"v{i + 1}") for i, x in enumerate(names)}
    return Constraint(apply_subst(sigma, c.lhs), apply_subst(sigma, c.rhs), c.index)


def constraint_symbols(cs: Iterable[Constraint]) -> list[str]:
    """Function symbols (hatted or not) occurring in ``cs``, first-occurrence order."""
    out: list[str] = []
    for c in cs:
        for t in (c.lhs, c.rhs):
            stack = [t]
            while stack:
                u = stack.pop()
                if type(u) is Call and u.name not in out:
                    out.append(u.name)
                if type(u) is not Var:
                    stack.extend(reversed(u.args))
    return out

