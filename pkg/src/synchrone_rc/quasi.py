"""Max-plus quasi-interpretations.

Every symbol gets a function of the shape ``max(t1, ..., tk)`` where each
``ti`` is affine with nonnegative rational coefficients.  Such functions are
closed under composition, so the interpretation of a term is again a
max-plus function of its variables (its normal form).
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .cfa import CallGraph
from .control_points import Constraint
from .lang import Cons, Program, Var, hat

ZERO = Fraction(0)
ONE = Fraction(1)


def pos(i: int) -> str:
    """Name of the i-th (1-based) formal of an interpretation."""
    return f"x{i}"


# ---------------------------------------------------------------------------
# max-plus algebra


@dataclass(frozen=True)
class AffineTerm:
    const: Fraction = ZERO
    coeffs: tuple = ()  # ((var, coeff), ...) sorted by var, no zero coefficients

    @staticmethod
    def make(const=0, coeffs: Optional[Mapping[str, object]] = None) -> "AffineTerm":
        cs = {v: Fraction(c) for v, c in (coeffs or {}).items() if Fraction(c) != 0}
        if Fraction(const) < 0 or any(c < 0 for c in cs.values()):
            raise ValueError("max-plus terms have nonnegative coefficients")
        return AffineTerm(Fraction(const), tuple(sorted(cs.items())))

    @property
    def coeff_map(self) -> dict:
        return dict(self.coeffs)

    def coeff(self, v: str) -> Fraction:
        for w, c in self.coeffs:
            if w == v:
                return c
        return ZERO

    def dominates(self, other: "AffineTerm") -> bool:
        """Coefficientwise >=, hence >= at every nonnegative point."""
        if self.const < other.const:
            return False
        mine = self.coeff_map
        return all(mine.get(v, ZERO) >= c for v, c in other.coeffs)

    def add(self, other: "AffineTerm") -> "AffineTerm":
        cs = self.coeff_map
        for v, c in other.coeffs:
            cs[v] = cs.get(v, ZERO) + c
        return AffineTerm(self.const + other.const, tuple(sorted(cs.items())))

    def scale(self, k: Fraction) -> "AffineTerm":
        if k == 0:
            return AffineTerm()
        return AffineTerm(self.const * k, tuple((v, c * k) for v, c in self.coeffs))

    def evaluate(self, point: Mapping[str, Fraction]) -> Fraction:
        return self.const + sum((c * point.get(v, ZERO) for v, c in self.coeffs), ZERO)

    def __str__(self) -> str:
        parts = []
        for v, c in self.coeffs:
            parts.append(v if c == 1 else f"{c}*{v}")
        if self.const or not parts:
            parts.append(str(self.const))
        return " + ".join(parts)


@dataclass(frozen=True)
class MaxPlus:
    """``max`` of a nonempty set of affine terms; dominated terms are pruned."""

    terms: tuple

    @staticmethod
    def of(terms: Iterable[AffineTerm]) -> "MaxPlus":
        ts = list(dict.fromkeys(terms))
        if not ts:
            raise ValueError("max of no terms")
        kept = []
        for i, t in enumerate(ts):
            if any(j != i and u.dominates(t) and (not t.dominates(u) or j < i) for j, u in enumerate(ts)):
                continue
            kept.append(t)
        return MaxPlus(tuple(sorted(kept, key=lambda t: (t.coeffs, t.const))))

    @staticmethod
    def const(k) -> "MaxPlus":
        return MaxPlus((AffineTerm.make(k),))

    @staticmethod
    def var(v: str) -> "MaxPlus":
        return MaxPlus((AffineTerm.make(0, {v: 1}),))

    def vars(self) -> list[str]:
        return sorted({v for t in self.terms for v, _ in t.coeffs})

    def add(self, other: "MaxPlus") -> "MaxPlus":
        return MaxPlus.of(a.add(b) for a in self.terms for b in other.terms)

    def scale(self, k) -> "MaxPlus":
        k = Fraction(k)
        return MaxPlus.of(t.scale(k) for t in self.terms)

    def join(self, other: "MaxPlus") -> "MaxPlus":
        return MaxPlus.of(self.terms + other.terms)

    def substitute(self, args: Mapping[str, "MaxPlus"]) -> "MaxPlus":
        """Replace variables by max-plus functions (simultaneously)."""
        out = []
        for t in self.terms:
            acc = MaxPlus.const(t.const)
            for v, c in t.coeffs:
                acc = acc.add(args[v].scale(c) if v in args else MaxPlus.var(v).scale(c))
            out.extend(acc.terms)
        return MaxPlus.of(out)

    def evaluate(self, point: Mapping[str, Fraction]) -> Fraction:
        return max(t.evaluate(point) for t in self.terms)

    def collapse(self, v: str = "x") -> "MaxPlus":
        """Identify every variable with ``v``."""
        return self.substitute({w: MaxPlus.var(v) for w in self.vars()})

    def __str__(self) -> str:
        if len(self.terms) == 1:
            return str(self.terms[0])
        return "max(" + ", ".join(map(str, self.terms)) + ")"


# ---------------------------------------------------------------------------
# inequalities


@dataclass(frozen=True)
class Verdict:
    status: str  # holds | refuted | unknown
    witness: Optional[dict] = None

    def __str__(self) -> str:
        if self.status == "refuted":
            pt = ", ".join(f"{v}={x}" for v, x in sorted(self.witness.items()))
            return f"refuted at {pt}" if pt else "refuted"
        return self.status


HOLDS = Verdict("holds")
UNKNOWN = Verdict("unknown")


def _sample_points(vs: Sequence[str], rng: random.Random, n_random: int) -> Iterable[dict]:
    corners = (ZERO, ONE, Fraction(1000))
    if len(vs) <= 6:
        for combo in itertools.product(corners, repeat=len(vs)):
            yield dict(zip(vs, combo))
    else:
        yield {v: ZERO for v in vs}
        for _ in range(200):
            yield {v: rng.choice(corners) for v in vs}
    for _ in range(n_random):
        scale = rng.choice((1, 10, 1000))
        yield {v: Fraction(rng.randint(0, 4 * scale), rng.randint(1, 4)) for v in vs}


def check_inequality(p: MaxPlus, q: MaxPlus, seed: int = 0, samples: int = 300) -> Verdict:
    """Does p >= q hold over the nonnegative rationals?

    ``holds`` is proved by domination: every term of q is below some term of
    p coefficientwise.  ``refuted`` comes with a point where q > p.  Anything
    else is ``unknown``.
    """
    if all(any(a.dominates(b) for a in p.terms) for b in q.terms):
        return HOLDS
    vs = sorted(set(p.vars()) | set(q.vars()))
    rng = random.Random(seed)
    for pt in _sample_points(vs, rng, samples):
        if q.evaluate(pt) > p.evaluate(pt):
            return Verdict("refuted", pt)
    return UNKNOWN


# ---------------------------------------------------------------------------
# assignments


class UncoveredSymbol(KeyError):
    pass


@dataclass
class Assignment:
    """Interpretations of symbols over positional variables x1..xn.

    Constructors without an explicit entry get ``1 + x1 + ... + xn`` (the
    constant 0 when nullary); registers are nullary constructors.
    """

    funcs: dict = field(default_factory=dict)  # name -> MaxPlus
    arity: dict = field(default_factory=dict)  # name -> int for every known symbol
    constructors: set = field(default_factory=set)

    @classmethod
    def for_program(cls, prog: Program, cg: CallGraph, entries: Optional[Mapping[str, MaxPlus]] = None
                    ) -> "Assignment":
        arity = {}
        cons = set()
        for name, sig in prog.constructors.items():
            arity[name] = sig.arity
            cons.add(name)
        for f in prog.functions:
            if f.behaviour:
                arity[hat(f.name)] = f.arity + len(cg.yhat(f.name))
            else:
                arity[f.name] = f.arity
        return cls(dict(entries or {}), arity, cons)

    def get(self, name: str) -> MaxPlus:
        if name in self.funcs:
            return self.funcs[name]
        if name in self.constructors:
            n = self.arity[name]
            return constructor_qi(n, 1 if n else 0)
        raise UncoveredSymbol(name)

    def with_entries(self, entries: Mapping[str, MaxPlus]) -> "Assignment":
        return Assignment({**self.funcs, **entries}, self.arity, self.constructors)

    def render(self) -> str:
        return "".join(f"qi {name} = {self.funcs[name]}\n" for name in self.funcs)

    def delta(self) -> Fraction:
        """Largest constructor constant (at least 1)."""
        ds = [self.get(c).terms[0].const for c in self.constructors if self.arity.get(c)]
        return max(ds + [ONE])


def constructor_qi(n: int, d) -> MaxPlus:
    return MaxPlus((AffineTerm.make(d if n else 0, {pos(i + 1): 1 for i in range(n)}),))


def extend(q: Assignment, e) -> MaxPlus:
    """Interpretation of a term as a max-plus function of its variables."""
    if type(e) is Var:
        return MaxPlus.var(e.name)
    f = q.get(e.name)
    args = {pos(i + 1): extend(q, a) for i, a in enumerate(e.args)}
    return f.substitute(args)


def validity_errors(q: Assignment, names: Iterable[str]) -> list[str]:
    """Shape conditions on the interpretations of ``names``."""
    errs = []
    for name in names:
        try:
            f = q.get(name)
        except UncoveredSymbol:
            errs.append(f"{name}: no interpretation")
            continue
        n = q.arity.get(name)
        extra = [v for v in f.vars() if n is None or v not in {pos(i + 1) for i in range(n)}]
        if extra:
            errs.append(f"{name}: variables {extra} beyond arity {n}")
            continue
        if name in q.constructors:
            t = f.terms[0]
            want = {pos(i + 1): ONE for i in range(n)}
            if len(f.terms) != 1 or t.coeff_map != want or (t.const < 1 if n else t.const != 0):
                errs.append(f"{name}: a constructor must be d + x1 + ... + xn with d >= 1 (0 if nullary)")
        else:
            for i in range(n):
                if not any(t.coeff(pos(i + 1)) >= 1 for t in f.terms):
                    errs.append(f"{name}: not above its argument x{i + 1}")
    return errs


@dataclass
class QIReport:
    verdicts: list  # (Constraint, Verdict)
    invalid: list

    @property
    def ok(self) -> bool:
        return not self.invalid and all(v.status == "holds" for _, v in self.verdicts)

    def render(self) -> str:
        lines = [f"  {c}: {v}" for c, v in self.verdicts] + [f"  invalid {e}" for e in self.invalid]
        head = "quasi-interpretation: " + ("pass" if self.ok else "fail")
        return "\n".join([head] + lines)


def _symbols(t, out: set) -> None:
    if type(t) is Var:
        return
    out.add(t.name)
    for a in t.args:
        _symbols(a, out)


def check_assignment(q: Assignment, cs: Iterable[Constraint], extra: Iterable[str] = (),
                     seed: int = 0) -> QIReport:
    cs = list(cs)
    names: set = set(extra)
    for c in cs:
        _symbols(c.lhs, names)
        _symbols(c.rhs, names)
    invalid = validity_errors(q, sorted(names))
    verdicts = []
    if not invalid:
        for c in cs:
            verdicts.append((c, check_inequality(extend(q, c.lhs), extend(q, c.rhs), seed)))
    return QIReport(verdicts, invalid)


# ---------------------------------------------------------------------------
# text format


_QI_TOKEN = re.compile(r"\s*(?:(\d+(?:/\d+)?)|(x\d+)|(max)|([()+*,]))")


def parse_expr(text: str) -> MaxPlus:
    """``1 + x1 + x2``, ``max(x1, x2)``, ``2*x1 + 1``, ``1/2*max(x1, x2)``."""
    toks = []
    i = 0
    text = text.strip()
    while i < len(text):
        m = _QI_TOKEN.match(text, i)
        if not m or m.end() == i:
            raise ValueError(f"bad interpretation near {text[i:]!r}")
        toks.append(next(g for g in m.groups() if g is not None))
        i = m.end()
        while i < len(text) and text[i].isspace():
            i += 1
    k = 0

    def peek():
        return toks[k] if k < len(toks) else None

    def take(want=None):
        nonlocal k
        t = peek()
        if t is None or (want is not None and t != want):
            raise ValueError(f"expected {want or 'a term'} in {text!r}")
        k += 1
        return t

    def expr():
        acc = term()
        while peek() == "+":
            take("+")
            acc = acc.add(term())
        return acc

    def term():
        t = peek()
        if t is not None and t[0].isdigit():
            take()
            c = Fraction(t)
            if peek() == "*":
                take("*")
                return atom().scale(c)
            return MaxPlus.const(c)
        return atom()

    def atom():
        t = take()
        if t.startswith("x"):
            return MaxPlus.var(t)
        if t == "max":
            take("(")
            acc = expr()
            while peek() == ",":
                take(",")
                acc = acc.join(expr())
            take(")")
            return acc
        if t == "(":
            e = expr()
            take(")")
            return e
        raise ValueError(f"unexpected {t!r} in {text!r}")

    out = expr()
    if k != len(toks):
        raise ValueError(f"trailing input in {text!r}")
    return out


def parse_assignment(lines: Iterable[str], behaviours: Iterable[str] = ()) -> dict:
    """Parse ``qi name = expr`` lines; a bare behaviour name means its hat."""
    behaviours = set(behaviours)
    out = {}
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("qi"):
            line = line[2:]
        name, sep, body = line.partition("=")
        name = name.strip()
        if not sep or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*\^?", name):
            raise ValueError(f"malformed interpretation line: {raw!r}")
        out[hat(name) if name in behaviours else name] = parse_expr(body)
    return out


# ---------------------------------------------------------------------------
# synthesis


class BudgetExceeded(RuntimeError):
    pass


def templates(n: int) -> list[MaxPlus]:
    """Candidate interpretations of a function of arity n, simplest first."""
    xs = [pos(i + 1) for i in range(n)]
    if n == 0:
        return [MaxPlus.const(b) for b in range(3)]
    out = []
    for b in range(3):
        out.append(MaxPlus.of(AffineTerm.make(b, {x: 1}) for x in xs))
    sums = []
    for coeffs in itertools.product((1, 2), repeat=n):
        for b in range(3):
            sums.append((sum(coeffs), b, coeffs))
    for _, b, coeffs in sorted(sums):
        out.append(MaxPlus((AffineTerm.make(b, dict(zip(xs, coeffs))),)))
    return list(dict.fromkeys(out))


def _callee_first(cs: list, names: list) -> list:
    deps: dict = {n: [] for n in names}
    for c in cs:
        rhs: set = set()
        _symbols(c.rhs, rhs)
        for g in sorted(rhs):
            if g in deps and g != c.lhs.name:
                deps[c.lhs.name].append(g)
    order, seen = [], set()

    def visit(n):
        if n in seen:
            return
        seen.add(n)
        for g in deps[n]:
            visit(g)
        order.append(n)

    for n in names:
        visit(n)
    return order


def synthesize(cs: Iterable[Constraint], base: Assignment, extra: Iterable[str] = (),
               budget: int = 200_000) -> Assignment:
    """Bounded search for an assignment under which every constraint holds
    by domination.  Entries already in ``base`` are kept fixed."""
    cs = list(cs)
    names: set = set(extra)
    for c in cs:
        _symbols(c.lhs, names)
        _symbols(c.rhs, names)
    funs = [n for n in sorted(names) if n not in base.constructors and n not in base.funcs]
    cons = [n for n in sorted(names) if n in base.constructors and n not in base.funcs and base.arity[n]]
    order = _callee_first(cs, funs)
    # a constraint is checked once the last of its open symbols is placed
    due: dict = {}
    for c in cs:
        syms: set = set()
        _symbols(c.lhs, syms)
        _symbols(c.rhs, syms)
        open_ = [order.index(s) for s in syms if s in order]
        due.setdefault(max(open_) if open_ else -1, []).append(c)
    cands = {f: templates(base.arity[f]) for f in order}
    spent = 0

    def holds(q: Assignment, c: Constraint) -> bool:
        p, r = extend(q, c.lhs), extend(q, c.rhs)
        return all(any(a.dominates(b) for a in p.terms) for b in r.terms)

    for twos in range(len(cons) + 1):
        for chosen in itertools.combinations(cons, twos):
            q = base.with_entries({c: constructor_qi(base.arity[c], 2 if c in chosen else 1)
                                   for c in cons})
            if not all(holds(q, c) for c in due.get(-1, ())):
                continue
            entries: dict = {}

            def go(i: int) -> bool:
                nonlocal spent
                if i == len(order):
                    return True
                f = order[i]
                for t in cands[f]:
                    spent += 1
                    if spent > budget:
                        raise BudgetExceeded(f"no interpretation found within {budget} candidates")
                    entries[f] = t
                    qq = q.with_entries(entries)
                    if all(holds(qq, c) for c in due.get(i, ())) and go(i + 1):
                        return True
                del entries[f]
                return False

            if go(0):
                return q.with_entries(entries)
    raise BudgetExceeded("the template family admits no interpretation for these constraints")


# ---------------------------------------------------------------------------
# bounds


def unary_bound(q: Assignment, hats: Iterable[str]) -> MaxPlus:
    """h(x) >= q_f(x, ..., x) for every f in ``hats``, and h(x) >= x."""
    h = MaxPlus.var("x")
    for f in hats:
        h = h.join(q.get(f).collapse("x"))
    return h


def iterate(h: MaxPlus, k: int, c) -> Fraction:
    x = Fraction(c)
    for _ in range(k):
        x = h.evaluate({"x": x})
    return x


def iterate_symbolic(h: MaxPlus, k: int) -> MaxPlus:
    """h^k as a max-plus function of x."""
    out = MaxPlus.var("x")
    for _ in range(k):
        out = h.substitute({"x": out})
    return out


@dataclass
class SizeBound:
    n: int  # threads
    m: int  # read instructions
    c: Fraction
    h: MaxPlus
    value: Fraction

    def render(self) -> str:
        return (f"size bound: h^{self.n * self.m + 1}(c) = {self.value} "
                f"with h(x) = {self.h}, c = {self.c}, n = {self.n}, m = {self.m}")


def size_bound(prog: Program, q: Assignment, starts: Optional[Sequence] = None,
               c: Optional[int] = None) -> SizeBound:
    """Bound on every value computed in an instant.

    ``starts`` lists ``(function, argument values)`` per thread at the start
    of the instant; by default the system's initial calls.  ``c`` overrides
    the largest interpretation of a parameter or register default.
    """
    if starts is None:
        starts = [(call.name, call.args) for call in prog.system]
    starts = [(f, args) for f, args in starts if f]
    n = len(prog.system)
    m = len(prog.labels())
    if c is None:
        # measured by q, which is at least the size since constructors add d >= 1
        vals = [a for _, args in starts for a in args] + list(prog.initial_store().values())
        c = max((value_interpretation(q, v) for v in vals), default=0)
    hats = {hat(f.name) for f in prog.functions if f.behaviour} | {hat(f) for f, _ in starts}
    h = unary_bound(q, sorted(x for x in hats if x in q.funcs))
    return SizeBound(n, m, Fraction(c), h, iterate(h, n * m + 1, c))


@dataclass
class SpaceBound:
    """Bound on the machine configuration size in one instant.

    Every stack slot and register counts ``|v| + 1``.  Per thread there is
    one behaviour frame plus at most ``E * (B + 2)^K`` nested expression
    frames: along a chain of nested calls the precedence class never rises
    and, inside one class, argument tuples decrease lexicographically, each
    component ranging over at most B + 2 sizes (one extra for a missing
    position).  Each frame holds at most S slots.
    """

    threads: int
    registers: int
    functions: int  # E
    max_arity: int  # K
    stack: int  # S
    value_bound: MaxPlus  # B as a function of c

    def evaluate(self, c) -> Fraction:
        b = self.value_bound.evaluate({"x": Fraction(c)})
        frames = 1 + self.functions * (b + 2) ** self.max_arity
        return self.threads * frames * self.stack * (b + 1) + self.registers * (b + 1)

    def render(self) -> str:
        return (f"space bound: {self.threads}*(1 + {self.functions}*(B+2)^{self.max_arity})"
                f"*{self.stack}*(B+1) + {self.registers}*(B+1) with B(c) = {self.value_bound}")


def space_bound(prog: Program, q: Assignment, stack: int, hats: Optional[Iterable[str]] = None
                ) -> SpaceBound:
    """Configuration-size polynomial for a program terminating by the path
    order and carrying a max-plus quasi-interpretation.  ``stack`` bounds the
    height of any frame (from the bytecode shape analysis)."""
    if hats is None:
        hats = [hat(f.name) for f in prog.functions if f.behaviour and hat(f.name) in q.funcs]
    n = len(prog.system)
    m = len(prog.labels())
    h = unary_bound(q, hats)
    exprs = [f for f in prog.functions if not f.behaviour]
    return SpaceBound(
        threads=n,
        registers=len(prog.registers),
        functions=len(exprs),
        max_arity=max((f.arity for f in exprs), default=0),
        stack=stack,
        value_bound=iterate_symbolic(h, n * m + 1),
    )


def value_interpretation(q: Assignment, v: Cons) -> Fraction:
    return extend(q, v).terms[0].const


__all__ = [
    "AffineTerm", "Assignment", "BudgetExceeded", "MaxPlus", "QIReport", "SizeBound", "SpaceBound",
    "UncoveredSymbol", "Verdict", "check_assignment", "check_inequality", "constructor_qi", "extend",
    "iterate", "parse_assignment", "parse_expr", "size_bound", "space_bound", "synthesize",
    "templates", "unary_bound", "validity_errors",
]
