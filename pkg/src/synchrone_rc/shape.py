"""Shape analysis of bytecode and end-to-end verification.

The analysis walks each segment's tree and assigns every reachable
instruction ``i`` a symbolic stack ``E_i`` (terms over fresh variables) and
a substitution ``sigma_i`` refining the formals.  Formals are ``x[1,k]``,
variables introduced by a successful branch at ``i`` are ``x[i,k]`` (``k``
the stack slot) and the value read at ``f[i]`` is ``x[f,i]``.

Along the way it re-derives the order constraints from the bytecode alone:
``tcall`` and ``return`` give index-0 constraints, ``write`` index-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .bytecode import BytecodeProgram, Segment
from .control_points import Constraint
from .flowgraph import FlowReport, check_flow_properties, flow_graph, within_instant_reads
from .lang import BEH, Call, Cons, Var, apply_subst, hat


@dataclass(frozen=True)
class ShapeError:
    segment: str
    index: int
    message: str

    def __str__(self) -> str:
        return f"{self.segment}[{self.index}]: {self.message}"


@dataclass(frozen=True)
class Row:
    index: int
    instruction: object
    stack: tuple  # terms, bottom first
    sigma: tuple  # images of the formals

    def render(self) -> str:
        e = " . ".join(map(str, self.stack)) or "(empty)"
        return f"{self.index}: {self.instruction} | {e}"


@dataclass
class SegmentShape:
    name: str
    rows: dict = field(default_factory=dict)  # index -> Row
    constraints: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def max_height(self) -> int:
        return max((len(r.stack) for r in self.rows.values()), default=0)

    def render(self) -> str:
        return "\n".join(self.rows[i].render() for i in sorted(self.rows))


@dataclass
class ShapeReport:
    segments: dict  # name -> SegmentShape

    @property
    def errors(self) -> list:
        return [e for s in self.segments.values() for e in s.errors]

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def constraints(self) -> list:
        out = [c for s in self.segments.values() for c in s.constraints]
        return list(dict.fromkeys(out))

    @property
    def max_height(self) -> int:
        return max((s.max_height for s in self.segments.values()), default=0)


@dataclass
class _State:
    theta: dict  # variable -> term; refinements of formals and read values
    stack: list  # (term, type) pairs
    after_next: bool = False


class _Fail(Exception):
    pass


def _subst(theta: dict, t):
    return apply_subst(theta, t) if theta else t


class _Analyser:
    def __init__(self, bp: BytecodeProgram):
        self.bp = bp
        self.segs = bp.segment_map
        self.cons = bp.constructors
        g = flow_graph(bp)
        self.yhat = {s.name: [Var(f"x[{f},{i}]") for f, i in within_instant_reads(bp, g, s.name)]
                     for s in bp.segments if s.behaviour}

    def referent(self, t: str) -> str:
        r = self.bp.referent(t)
        if r is None:
            raise _Fail(f"{t} is not a reference type")
        return r

    def head(self, seg: Segment, formals: list, theta: dict) -> Call:
        args = tuple(_subst(theta, x) for x in formals)
        if seg.behaviour:
            return Call(hat(seg.name), args + tuple(_subst(theta, y) for y in self.yhat[seg.name]))
        return Call(seg.name, args)

    def target(self, g: str, args: tuple) -> Call:
        if self.segs[g].behaviour:
            return Call(hat(g), tuple(args) + tuple(self.yhat[g]))
        return Call(g, tuple(args))

    def take_args(self, st: list, g: str, n: int) -> list:
        seg = self.segs.get(g)
        if seg is None:
            raise _Fail(f"unknown function {g}")
        if seg.arity != n:
            raise _Fail(f"{g} has arity {seg.arity}, not {n}")
        if n > len(st):
            raise _Fail("stack too short for the call")
        args = st[len(st) - n:]
        for (e, t), want in zip(args, seg.param_types):
            if t != want:
                raise _Fail(f"argument {e} of {g} has type {t}, expected {want}")
        return args

    def segment(self, seg: Segment) -> SegmentShape:
        out = SegmentShape(seg.name)
        formals = [Var(f"x[1,{k}]") for k in range(1, seg.arity + 1)]
        init = _State({}, [(x, t) for x, t in zip(formals, seg.param_types)])
        work = [(1, init)]
        states: dict = {}
        while work:
            i, st = work.pop()
            if i in states:
                out.errors.append(ShapeError(seg.name, i, "reached twice"))
                continue
            states[i] = st
            ins = seg.at(i)
            sigma = tuple(_subst(st.theta, x) for x in formals)
            out.rows[i] = Row(i, ins, tuple(e for e, _ in st.stack), sigma)
            try:
                succ = self.step(seg, formals, i, ins, st, states, out.constraints)
            except _Fail as exc:
                out.errors.append(ShapeError(seg.name, i, str(exc)))
                continue
            for j, nst in reversed(succ):
                if not 1 <= j <= len(seg):
                    out.errors.append(ShapeError(seg.name, i, f"falls off the segment at {j}"))
                    continue
                work.append((j, nst))
        return out

    def step(self, seg, formals, i, ins, st: _State, states: dict, cs: list) -> list:
        op, E = ins.op, st.stack
        h = len(E)

        def same(stack):
            return _State(st.theta, stack, st.after_next)

        if op == "load":
            if not 1 <= ins.a <= h:
                raise _Fail(f"load {ins.a} with stack height {h}")
            return [(i + 1, same(E + [E[ins.a - 1]]))]
        if op == "branch":
            if not E:
                raise _Fail("branch on an empty stack")
            e, t = E[-1]
            sig = self.cons.get(ins.a)
            if sig is None or sig.result != t:
                raise _Fail(f"branch {ins.a} on {e} of type {t}")
            if type(e) is Cons:
                if e.name == ins.a:
                    return [(i + 1, same(E[:-1] + list(zip(e.args, sig.arg_types))))]
                return [(ins.b, st)]
            if type(e) is not Var:
                raise _Fail(f"branch on the call {e}")
            ys = [Var(f"x[{i + 1},{h + k}]") for k in range(sig.arity)]
            pat = Cons(ins.a, tuple(ys))
            sub = {e.name: pat}
            theta = {x: apply_subst(sub, v) for x, v in st.theta.items()}
            theta.setdefault(e.name, pat)
            rest = [(apply_subst(sub, a), ta) for a, ta in E[:-1]]
            matched = _State(theta, rest + list(zip(ys, sig.arg_types)), st.after_next)
            return [(i + 1, matched), (ins.b, st)]
        if op == "build":
            sig = self.cons.get(ins.a)
            if sig is None or sig.arity != ins.b or ins.b > h:
                raise _Fail(f"cannot build {ins.a} from {ins.b} entries")
            args = E[h - ins.b:]
            for (a, ta), want in zip(args, sig.arg_types):
                if ta != want:
                    raise _Fail(f"argument {a} of {ins.a} has type {ta}, expected {want}")
            term = Cons(ins.a, tuple(a for a, _ in args))
            return [(i + 1, same(E[:h - ins.b] + [(term, sig.result)]))]
        if op == "call":
            args = self.take_args(E, ins.a, ins.b)
            ret = self.segs[ins.a].ret
            term = Call(ins.a, tuple(a for a, _ in args))
            return [(i + 1, same(E[:h - ins.b] + [(term, ret)]))]
        if op == "tcall":
            args = self.take_args(E, ins.a, ins.b)
            g = self.segs[ins.a]
            if g.ret != seg.ret:
                raise _Fail(f"tail call from {seg.name} : {seg.ret} to {g.name} : {g.ret}")
            if not st.after_next:
                rhs = self.target(ins.a, tuple(a for a, _ in args))
                cs.append(Constraint(self.head(seg, formals, st.theta), rhs, 0))
            return []
        if op == "return":
            if not E:
                raise _Fail("return with an empty stack")
            e, t = E[-1]
            if t != seg.ret:
                raise _Fail(f"returns {e} of type {t}, expected {seg.ret}")
            if seg.behaviour:
                if type(e) is not Call or not self.segs[e.name].behaviour:
                    raise _Fail("a behaviour can only return a behaviour call")
                if not st.after_next:
                    cs.append(Constraint(self.head(seg, formals, st.theta),
                                         self.target(e.name, e.args), 0))
            else:
                cs.append(Constraint(self.head(seg, formals, st.theta), e, 0))
            return []
        if op == "read":
            if not seg.behaviour:
                raise _Fail("read outside a behaviour")
            t = self._ref_type(ins.a, E)
            return [(i + 1, same(E + [(Var(f"x[{seg.name},{i}]"), self.referent(t))]))]
        if op == "write":
            if not seg.behaviour:
                raise _Fail("write outside a behaviour")
            if not E:
                raise _Fail("write with an empty stack")
            t = self._ref_type(ins.a, E[:-1])
            e, te = E[-1]
            if te != self.referent(t):
                raise _Fail(f"writes {e} of type {te} to a {t} register")
            cs.append(Constraint(self.head(seg, formals, st.theta), e, 1))
            return [(i + 1, same(E[:-1]))]
        if op in ("yield", "next"):
            if not seg.behaviour:
                raise _Fail(f"{op} outside a behaviour")
            nst = _State(st.theta, E, st.after_next or op == "next")
            return [(i + 1, nst)]
        if op == "wait":
            j = ins.a
            at_read = states.get(j)
            if at_read is None or seg.at(j).op != "read":
                raise _Fail(f"wait {j} does not return to an enclosing read")
            want = [e for e, _ in at_read.stack] + [Var(f"x[{seg.name},{j}]")]
            if [e for e, _ in E] != want:
                raise _Fail(f"stack at the wait differs from the stack at the read {j}")
            if [_subst(st.theta, x) for x in formals] != [_subst(at_read.theta, x) for x in formals]:
                raise _Fail("formals refined between the read and the wait")
            return [(i + 1, _State(at_read.theta, list(at_read.stack), True))]
        if op == "stop":
            if not seg.behaviour:
                raise _Fail("stop outside a behaviour")
            return []
        raise _Fail(f"unknown instruction {op}")

    def _ref_type(self, operand, E: list) -> str:
        if isinstance(operand, str):
            sig = self.cons.get(operand)
            if sig is None:
                raise _Fail(f"unknown register {operand}")
            return sig.result
        if not 1 <= operand <= len(E):
            raise _Fail(f"register index {operand} outside the stack")
        return E[operand - 1][1]


def analyse(bp: BytecodeProgram) -> ShapeReport:
    an = _Analyser(bp)
    return ShapeReport({s.name: an.segment(s) for s in bp.segments})


# ---------------------------------------------------------------------------
# the whole pipeline on bytecode


@dataclass
class Stage:
    name: str
    ok: Optional[bool]  # None when skipped
    detail: str = ""

    def render(self) -> str:
        status = "skipped" if self.ok is None else ("pass" if self.ok else "fail")
        return f"{self.name}: {status}" + (f", {self.detail}" if self.detail else "")


@dataclass
class VerifyReport:
    stages: list
    flow: Optional[FlowReport] = None
    shape: Optional[ShapeReport] = None
    precedence: object = None
    assignment: object = None

    @property
    def ok(self) -> bool:
        return all(s.ok is not False for s in self.stages)

    def stage(self, name: str) -> Optional[Stage]:
        for s in self.stages:
            if s.name == name:
                return s
        return None

    @property
    def first_failure(self) -> Optional[Stage]:
        return next((s for s in self.stages if s.ok is False), None)

    def render(self) -> str:
        lines = [s.render() for s in self.stages]
        if self.shape is not None:
            for c in self.shape.constraints:
                lines.append(f"  {c}")
        return "\n".join(lines) + "\n"


def bytecode_assignment(bp: BytecodeProgram, entries: dict):
    """An assignment whose arities come from the bytecode alone."""
    from .quasi import Assignment

    an = _Analyser(bp)
    arity, cons = {}, set()
    for name, sig in bp.constructors.items():
        arity[name] = sig.arity
        cons.add(name)
    for s in bp.segments:
        if s.behaviour:
            arity[hat(s.name)] = s.arity + len(an.yhat[s.name])
        else:
            arity[s.name] = s.arity
    return Assignment(dict(entries), arity, cons)


def verify(bp: BytecodeProgram, prec=None, qi_entries: Optional[dict] = None,
           read_once: bool = True, shape_only: bool = False) -> VerifyReport:
    """Structure, flow properties, shape analysis, then termination and
    quasi-interpretation on the constraints read off the bytecode.

    ``prec`` and ``qi_entries`` are searched for when omitted.
    """
    from .quasi import BudgetExceeded, check_assignment, synthesize
    from .termination import BoundExceeded, check_termination, search_precedence

    rep = VerifyReport([])
    errs = bp.validate()
    rep.stages.append(Stage("structure", not errs, "; ".join(errs)))
    if errs:
        return rep
    flow = check_flow_properties(bp, read_once=read_once)
    rep.flow = flow
    rep.stages.append(Stage("flow", flow.ok, "; ".join(map(str, flow.violations[:3]))))
    shape = analyse(bp)
    rep.shape = shape
    rep.stages.append(Stage("shape", shape.ok, "; ".join(map(str, shape.errors[:3]))))
    if not (flow.ok and shape.ok) or shape_only:
        return rep
    cs = shape.constraints
    if prec is None:
        try:
            prec = search_precedence(cs)
        except BoundExceeded as exc:
            rep.stages.append(Stage("termination", False, str(exc)))
            return rep
    if prec is None:
        rep.stages.append(Stage("termination", False, "no precedence found"))
        return rep
    tv = check_termination(cs, prec)
    rep.precedence = prec
    detail = (f"precedence {prec.render()}, linear {'yes' if tv.linear else 'no'}" if tv.ok
              else f"fails at {tv.failed}")
    rep.stages.append(Stage("termination", tv.ok, detail))
    if not tv.ok:
        return rep
    base = bytecode_assignment(bp, qi_entries or {})
    hats = [hat(s.name) for s in bp.segments if s.behaviour]
    if qi_entries is None:
        try:
            q = synthesize(cs, base, extra=hats)
        except BudgetExceeded as exc:
            rep.stages.append(Stage("quasi-interpretation", False, str(exc)))
            return rep
    else:
        q = base
    qr = check_assignment(q, cs, extra=hats)
    rep.assignment = q
    bad = [f"{c}: {v}" for c, v in qr.verdicts if v.status != "holds"] + qr.invalid
    rep.stages.append(Stage("quasi-interpretation", qr.ok, "; ".join(bad[:3])))
    return rep


__all__ = [
    "Row", "SegmentShape", "ShapeError", "ShapeReport", "Stage", "VerifyReport", "analyse",
    "bytecode_assignment", "verify",
]
