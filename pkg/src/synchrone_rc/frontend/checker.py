"""Well-formedness and type checking.

Types are monomorphic names.  Unannotated parameters and return types get
type variables that are solved by unification over the whole program, so
declaration order does not matter.  The result is the same program with
every parameter and return type filled in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..lang import (
    BEH, Assign, Call, Cons, FunctionDef, Match, Next, Program, Read, Span, Stop, Var,
    Yield, is_shallow_linear, variables,
)
from .diagnostics import ERROR, Diagnostic, DiagnosticError, has_errors

TypedProgram = Program

Ty = Union[str, int]  # declared type name, or a type variable id


class _Unifier:
    def __init__(self):
        self.parent: dict[int, Ty] = {}
        self.count = 0

    def fresh(self) -> int:
        self.count += 1
        self.parent[self.count] = self.count
        return self.count

    def find(self, t: Ty) -> Ty:
        while isinstance(t, int) and self.parent[t] != t:
            t = self.parent[t]
        return t

    def unify(self, a: Ty, b: Ty) -> bool:
        a, b = self.find(a), self.find(b)
        if a == b:
            return True
        if isinstance(a, int):
            self.parent[a] = b
            return True
        if isinstance(b, int):
            self.parent[b] = a
            return True
        return False


@dataclass
class _Ctx:
    env: dict
    forbidden: dict = field(default_factory=dict)  # name -> reason

    def bind(self, names_types, drop=()):
        env = {k: v for k, v in self.env.items() if k not in drop}
        forbidden = {k: v for k, v in self.forbidden.items() if k not in dict(names_types)}
        for n, t in names_types:
            env[n] = t
        return _Ctx(env, forbidden)


class _Checker:
    def __init__(self, prog: Program):
        self.prog = prog
        self.diags: list[Diagnostic] = []
        self.u = _Unifier()
        self.types = prog.type_map
        self.cons = prog.constructors
        self.funcs = prog.function_map
        self.sig: dict[str, tuple[list[Ty], Ty]] = {}
        self.deferred: list[tuple[Ty, Ty, Optional[Span]]] = []

    def err(self, span, msg, code):
        line, col = (span.line, span.col) if span else (0, 0)
        self.diags.append(Diagnostic(ERROR, line, col, msg, code))

    def show(self, t: Ty) -> str:
        t = self.u.find(t)
        return t if isinstance(t, str) else f"?{t}"

    def expect(self, actual: Ty, wanted: Ty, span, what: str):
        if not self.u.unify(actual, wanted):
            self.err(span, f"type mismatch in {what}: expected {self.show(wanted)}, found {self.show(actual)}",
                     "type")

    # declarations
    def check_decls(self):
        for t in self.prog.types:
            for c in t.constructors:
                for a in c.arg_types:
                    if a not in self.types:
                        self.err(None, f"constructor {c.name} mentions unknown type {a}", "unknown-type")
            if t.is_ref and t.referent not in self.types:
                self.err(None, f"reftype {t.name} refers to unknown type {t.referent}", "unknown-type")
        for f in self.prog.functions:
            if f.param_types and len(f.param_types) != len(f.params):
                self.err(f.span, f"{f.name}: parameter annotations do not match formals", "arity")
            ptys: list[Ty] = []
            for i in range(f.arity):
                ann = f.param_types[i] if i < len(f.param_types) else None
                if ann is not None and ann not in self.types:
                    self.err(f.span, f"{f.name}: unknown type {ann}", "unknown-type")
                    ann = None
                ptys.append(ann if ann is not None else self.u.fresh())
            if f.behaviour:
                if f.ret not in (None, BEH):
                    self.err(f.span, f"behaviour {f.name} cannot declare a value type", "type")
                ret: Ty = BEH
            elif f.ret is not None:
                if f.ret not in self.types:
                    self.err(f.span, f"{f.name}: unknown type {f.ret}", "unknown-type")
                ret = f.ret if f.ret in self.types else self.u.fresh()
            else:
                ret = self.u.fresh()
            self.sig[f.name] = (ptys, ret)

    def referent_of(self, t: Ty, span) -> Ty:
        t = self.u.find(t)
        if isinstance(t, str):
            decl = self.types.get(t)
            if decl is None or not decl.is_ref:
                self.err(span, f"expected a reference type, found {t}", "type")
                return self.u.fresh()
            return decl.referent
        out = self.u.fresh()
        self.deferred.append((t, out, span))
        return out

    # expressions
    def expr(self, e, ctx: _Ctx) -> Ty:
        te = type(e)
        if te is Var:
            if e.name in ctx.forbidden:
                self.err(e.span, f"{e.name} is out of scope here ({ctx.forbidden[e.name]})", "scope")
                return self.u.fresh()
            if e.name not in ctx.env:
                self.err(e.span, f"unbound variable {e.name}", "unknown-symbol")
                return self.u.fresh()
            return ctx.env[e.name]
        if te is Cons:
            sig = self.cons[e.name]
            if len(e.args) != sig.arity:
                self.err(e.span, f"constructor {e.name} expects {sig.arity} arguments, got {len(e.args)}",
                         "arity")
            for a, t in zip(e.args, sig.arg_types):
                self.expect(self.expr(a, ctx), t, getattr(a, "span", e.span), f"argument of {e.name}")
            return sig.result
        # call
        f = self.funcs[e.name]
        if f.behaviour:
            self.err(e.span, f"behaviour {e.name} used in expression position", "beh-position")
        return self.apply(e, ctx)

    def apply(self, e: Call, ctx) -> Ty:
        ptys, ret = self.sig[e.name]
        if len(e.args) != len(ptys):
            self.err(e.span, f"{e.name} expects {len(ptys)} arguments, got {len(e.args)}", "arity")
        for a, t in zip(e.args, ptys):
            self.expect(self.expr(a, ctx), t, getattr(a, "span", e.span), f"argument of {e.name}")
        return ret

    def beh_call(self, e, ctx, where: str):
        if type(e) is not Call or not self.funcs[e.name].behaviour:
            self.err(getattr(e, "span", None), f"{where} must call a behaviour function", "beh-position")
            if type(e) is Call:
                self.apply(e, ctx)
            return
        self.apply(e, ctx)

    def pattern_vars(self, pat, scrut_ty: Ty, ctx: _Ctx, span, scrutinee: Optional[str]):
        """Type a shallow linear pattern; returns [(var, type)]."""
        if type(pat) is Var:
            out = [(pat.name, scrut_ty)]
        else:
            if not is_shallow_linear(pat):
                self.err(span, f"pattern {pat} must be shallow and linear", "pattern")
                return [(x, self.u.fresh()) for x in variables(pat)]
            sig = self.cons.get(pat.name)
            if sig is None:
                return []
            if len(pat.args) != sig.arity:
                self.err(span, f"constructor {pat.name} expects {sig.arity} arguments", "arity")
            self.expect(scrut_ty, sig.result, span, f"pattern {pat.name}")
            out = [(a.name, t) for a, t in zip(pat.args, sig.arg_types)]
        for x, _ in out:
            if x in ctx.env and x != scrutinee:
                self.err(span, f"pattern variable {x} shadows a variable in scope", "shadow")
        return out

    def match(self, b: Match, ctx: _Ctx, body_fn) -> Ty:
        if b.var not in ctx.env:
            self.err(b.span, f"match on unbound variable {b.var}", "unknown-symbol")
            xt = self.u.fresh()
        else:
            xt = ctx.env[b.var]
        ys = self.pattern_vars(b.pattern, xt, ctx, b.span, b.var)
        then_ctx = ctx.bind(ys, drop=(b.var,))
        if b.var not in dict(ys):
            then_ctx.forbidden[b.var] = "the matched variable is consumed by the then branch"
        else_ctx = ctx.bind([])
        for y, _ in ys:
            if y != b.var:
                else_ctx.forbidden[y] = "pattern variables are not bound in the else branch"
        t1 = body_fn(b.then, then_ctx)
        t2 = body_fn(b.orelse, else_ctx)
        return t1, t2

    def expr_body(self, b, ctx) -> Ty:
        if type(b) is Match:
            t1, t2 = self.match(b, ctx, self.expr_body)
            self.expect(t2, t1, b.span, "match branches")
            return t1
        if type(b) in (Stop, Yield, Next, Assign, Read):
            self.err(getattr(b, "span", None), "behaviour construct in an expression body", "beh-position")
            return self.u.fresh()
        return self.expr(b, ctx)

    def target(self, t, ctx) -> Ty:
        if type(t) is Cons:
            if not self.prog.is_register(t.name):
                self.err(t.span, f"{t.name} is not a register", "type")
                return self.u.fresh()
            return self.referent_of(self.cons[t.name].result, t.span)
        return self.referent_of(self.expr(t, ctx), t.span)

    def behaviour(self, b, ctx) -> Ty:
        tb = type(b)
        if tb is Stop:
            pass
        elif tb is Yield:
            self.behaviour(b.body, ctx)
        elif tb is Next:
            self.beh_call(b.call, ctx, "next")
        elif tb is Call:
            self.beh_call(b, ctx, "tail position")
        elif tb is Assign:
            rt = self.target(b.target, ctx)
            self.expect(self.expr(b.expr, ctx), rt, b.span, "assignment")
            self.behaviour(b.body, ctx)
        elif tb is Match:
            self.match(b, ctx, self.behaviour)
        elif tb is Read:
            rt = self.target(b.target, ctx)
            for br in b.branches:
                ys = self.pattern_vars(br.pattern, rt, ctx, b.span, None)
                self.behaviour(br.body, ctx.bind(ys))
            self.beh_call(b.default, ctx, "default branch")
        else:
            self.err(getattr(b, "span", None), "expression where a behaviour is expected", "beh-position")
        return BEH

    def value(self, v, ty: Ty, what: str):
        if type(v) is not Cons or not v.is_value:
            self.err(getattr(v, "span", None), f"{what} must be a value", "type")
            return
        self.expect(self.expr(v, _Ctx({})), ty, v.span, what)

    def run(self) -> Program:
        self.check_decls()
        if has_errors(self.diags):
            raise DiagnosticError(self.diags)
        for t in self.prog.types:
            for r in t.registers:
                self.value(r.default, t.referent, f"default of register {r.name}")
        for f in self.prog.functions:
            ptys, ret = self.sig[f.name]
            ctx = _Ctx(dict(zip(f.params, ptys)))
            if f.behaviour:
                self.behaviour(f.body, ctx)
            else:
                self.expect(self.expr_body(f.body, ctx), ret, f.span, f"result of {f.name}")
        for c in self.prog.system:
            if type(c) is not Call or not self.funcs[c.name].behaviour:
                self.err(getattr(c, "span", None), "system entries must call behaviour functions", "system")
                continue
            ptys, _ = self.sig[c.name]
            if len(c.args) != len(ptys):
                self.err(c.span, f"{c.name} expects {len(ptys)} arguments", "arity")
            for a, t in zip(c.args, ptys):
                self.value(a, t, f"argument of {c.name}")
        # reference types discovered late
        progress = True
        while self.deferred and progress:
            progress = False
            for item in list(self.deferred):
                t, out, span = item
                if isinstance(self.u.find(t), str):
                    self.deferred.remove(item)
                    self.expect(self.referent_of(t, span), out, span, "reference")
                    progress = True
        for _, _, span in self.deferred:
            self.err(span, "cannot infer the reference type here; annotate the parameter", "infer")
        if has_errors(self.diags):
            raise DiagnosticError(self.diags)
        funcs = []
        for f in self.prog.functions:
            ptys, ret = self.sig[f.name]
            rp = tuple(self.u.find(t) for t in ptys)
            rr = self.u.find(ret)
            if any(not isinstance(t, str) for t in rp) or not isinstance(rr, str):
                self.err(f.span, f"cannot infer all types of {f.name}; annotate it", "infer")
                continue
            funcs.append(FunctionDef(f.name, f.params, rp, None if f.behaviour else rr,
                                     f.body, f.behaviour, f.span))
        if has_errors(self.diags):
            raise DiagnosticError(self.diags)
        return Program(self.prog.types, tuple(funcs), self.prog.system, self.prog.orders, self.prog.qis)


def typecheck(prog: Program) -> TypedProgram:
    """Return ``prog`` with all types filled in, or raise :class:`DiagnosticError`."""
    return _Checker(prog).run()


def signature(prog: TypedProgram) -> dict[str, tuple[tuple, str]]:
    """Function name -> (parameter types, result type or 'beh')."""
    return {f.name: (f.param_types, BEH if f.behaviour else f.ret) for f in prog.functions}
