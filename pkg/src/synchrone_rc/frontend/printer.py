"""Pretty-printer producing source text that parses back to an equal program."""

from __future__ import annotations

from ..lang import (
    Assign, Call, Cons, FunctionDef, Match, Next, Program, Read, Stop, TypeDecl, Var, Yield,
)


def show_term(t) -> str:
    return str(t)


def show_body(b, indent: int = 1) -> str:
    pad = "\n" + "    " * indent
    t = type(b)
    if t in (Var, Cons, Call):
        return str(b)
    if t is Stop:
        return "stop"
    if t is Yield:
        return "yield. " + show_body(b.body, indent)
    if t is Next:
        return f"next. {b.call}"
    if t is Assign:
        return f"{b.target} := {b.expr}. {show_body(b.body, indent)}"
    if t is Match:
        return (f"match {b.var} with {b.pattern}{pad}then {show_body(b.then, indent + 1)}"
                f"{pad}else {show_body(b.orelse, indent + 1)}")
    if t is Read:
        parts = [f"read<{b.label}> {b.target} with"]
        for br in b.branches:
            parts.append(f"{pad}  {br.pattern} => {show_body(br.body, indent + 1)}")
            parts.append(f"{pad}|")
        parts.append(f" [_] => {b.default}" if b.branches else f"{pad}  [_] => {b.default}")
        return "".join(parts)
    raise TypeError(b)


def show_type(t: TypeDecl) -> str:
    if t.is_ref:
        regs = " || ".join(f"{r.name} = {r.default}" for r in t.registers)
        return f"reftype {t.name} = ref {t.referent} with {regs}"
    cons = []
    for c in t.constructors:
        cons.append(f"{c.name} of ({', '.join(c.arg_types)})" if c.arg_types else c.name)
    return f"type {t.name} = {' || '.join(cons)}"


def show_function(f: FunctionDef) -> str:
    params = []
    for i, x in enumerate(f.params):
        ty = f.param_types[i] if i < len(f.param_types) else None
        params.append(f"{x} : {ty}" if ty else x)
    head = f"{'beh' if f.behaviour else 'def'} {f.name}({', '.join(params)})"
    if f.ret and not f.behaviour:
        head += f" : {f.ret}"
    return f"{head} =\n    {show_body(f.body)}"


def pretty(p: Program) -> str:
    out = [show_type(t) for t in p.types]
    out.append("")
    for f in p.functions:
        out.append(show_function(f))
        out.append("")
    if p.system:
        out.append("system = " + ", ".join(map(str, p.system)))
    out.extend(f"order {o}" for o in p.orders)
    out.extend(f"qi {q}" for q in p.qis)
    return "\n".join(out).rstrip() + "\n"
