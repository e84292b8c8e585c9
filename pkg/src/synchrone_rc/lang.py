"""Term algebra shared by every stage of the toolchain.

Values, patterns and expressions are all first-order terms built from three
node kinds: :class:`Var`, :class:`Cons` (constructor application, registers
included) and :class:`Call` (function application).  A *value* is a ground
``Cons`` term.  Behaviours are a separate small AST on top of expressions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Union

BEH = "beh"
HAT = "^"


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True, slots=True)
class Var:
    name: str
    span: Optional[Span] = field(default=None, compare=False, repr=False, hash=False)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Cons:
    name: str
    args: tuple = ()
    span: Optional[Span] = field(default=None, compare=False, repr=False, hash=False)
    # size of the term when ground, -1 otherwise
    _size: int = field(default=-1, compare=False, repr=False, hash=False)

    def __post_init__(self) -> None:
        total = 0
        for a in self.args:
            if type(a) is not Cons or a._size < 0:
                return
            total += a._size
        object.__setattr__(self, "_size", total + 1 if self.args else 0)

    @property
    def is_value(self) -> bool:
        return self._size >= 0

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(map(str, self.args))})"


@dataclass(frozen=True, slots=True)
class Call:
    name: str
    args: tuple = ()
    span: Optional[Span] = field(default=None, compare=False, repr=False, hash=False)

    def __str__(self) -> str:
        return f"{self.name}({', '.join(map(str, self.args))})"


Term = Union[Var, Cons, Call]
Value = Cons
Pattern = Union[Var, Cons]
Substitution = Mapping[str, Term]


def value(name: str, *args: Cons) -> Cons:
    """Build a value, checking that it is ground."""
    v = Cons(name, tuple(args))
    if not v.is_value:
        raise ValueError(f"not a value: {v}")
    return v


def size(v: Cons) -> int:
    """|c| = 0 and |c(v1..vn)| = 1 + sum |vi|."""
    if type(v) is not Cons or v._size < 0:
        raise TypeError(f"size is defined on values only, got {v}")
    return v._size


def hat(name: str) -> str:
    return name + HAT


def is_hat(name: str) -> bool:
    return name.endswith(HAT)


def unhat(name: str) -> str:
    return name[: -len(HAT)] if is_hat(name) else name


def variables(t: Term) -> list[str]:
    """Variables of ``t`` in left-to-right order of first occurrence."""
    out: list[str] = []
    stack = [t]
    while stack:
        u = stack.pop()
        if type(u) is Var:
            if u.name not in out:
                out.append(u.name)
        else:
            stack.extend(reversed(u.args))
    return out


def is_linear(p: Term) -> bool:
    seen: list[str] = []
    stack = [p]
    while stack:
        u = stack.pop()
        if type(u) is Var:
            if u.name in seen:
                return False
            seen.append(u.name)
        else:
            stack.extend(u.args)
    return True


def is_shallow_linear(p: Term) -> bool:
    return (
        type(p) is Cons
        and all(type(a) is Var for a in p.args)
        and len({a.name for a in p.args}) == len(p.args)
    )


def apply_subst(sigma: Substitution, t: Term) -> Term:
    """Homomorphic replacement of variables; unmapped variables and registers stay."""
    if not sigma:
        return t
    if type(t) is Var:
        return sigma.get(t.name, t)
    if not t.args:
        return t
    args = tuple(apply_subst(sigma, a) for a in t.args)
    return type(t)(t.name, args, t.span)


def match_pattern(p: Pattern, v: Cons) -> Optional[dict[str, Cons]]:
    """Return the unique sigma with sigma(p) = v, or None."""
    sigma: dict[str, Cons] = {}
    stack = [(p, v)]
    while stack:
        q, w = stack.pop()
        if type(q) is Var:
            bound = sigma.get(q.name)
            if bound is not None and bound != w:
                return None
            sigma[q.name] = w
        elif type(q) is Cons and q.name == w.name and len(q.args) == len(w.args):
            stack.extend(zip(q.args, w.args))
        else:
            return None
    return sigma


def compose(outer: Mapping[str, Term], inner: Mapping[str, Term]) -> dict[str, Term]:
    """outer . inner: apply ``inner`` first, then ``outer``."""
    out = {x: apply_subst(outer, t) for x, t in inner.items()}
    for x, t in outer.items():
        out.setdefault(x, t)
    return out


def subterms(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        u = stack.pop()
        yield u
        if type(u) is not Var:
            stack.extend(u.args)


# ---------------------------------------------------------------------------
# behaviours and bodies


@dataclass(frozen=True, slots=True)
class Match:
    """``match x with c(y..) then a else b``; shared by expression bodies and behaviours."""

    var: str
    pattern: Cons
    then: "Body"
    orelse: "Body"
    span: Optional[Span] = field(default=None, compare=False, repr=False, hash=False)


@dataclass(frozen=True, slots=True)
class Stop:
    span: Optional[Span] = field(default=None, compare=False, repr=False, hash=False)


@dataclass(frozen=True, slots=True)
class Yield:
    body: "Behaviour"
    span: Optional[Span] = field(default=None, compare=False, repr=False, hash=False)


@dataclass(frozen=True, slots=True)
class Next:
    call: Call
    span: Optional[Span] = field(default=None, compare=False, repr=False, hash=False)


@dataclass(frozen=True, slots=True)
class Assign:
    target: Union[Var, Cons]
    expr: Term
    body: "Behaviour"
    span: Optional[Span] = field(default=None, compare=False, repr=False, hash=False)


@dataclass(frozen=True, slots=True)
class Branch:
    pattern: Pattern
    body: "Behaviour"


@dataclass(frozen=True, slots=True)
class Read:
    target: Union[Var, Cons]
    branches: tuple
    default: Call
    label: str
    span: Optional[Span] = field(default=None, compare=False, repr=False, hash=False)


Behaviour = Union[Stop, Call, Yield, Next, Assign, Read, Match]
Body = Union[Term, Behaviour]


def body_children(b: Body) -> tuple:
    """Sub-bodies of ``b`` in textual order (not expressions)."""
    if type(b) is Match:
        return (b.then, b.orelse)
    if type(b) is Yield:
        return (b.body,)
    if type(b) is Assign:
        return (b.body,)
    if type(b) is Read:
        return tuple(br.body for br in b.branches)
    return ()


def reads_in(b: Body) -> list[Read]:
    """Read instructions of a body in textual order."""
    out = []
    stack = [b]
    while stack:
        u = stack.pop()
        if type(u) is Read:
            out.append(u)
        stack.extend(reversed(body_children(u)))
    return out


def free_vars(b: Body) -> set[str]:
    """Free variables of an expression body or behaviour."""
    t = type(b)
    if t in (Var, Cons, Call):
        return set(variables(b))
    if t is Stop:
        return set()
    if t is Yield:
        return free_vars(b.body)
    if t is Next:
        return free_vars(b.call)
    if t is Assign:
        return free_vars(b.target) | free_vars(b.expr) | free_vars(b.body)
    if t is Match:
        ys = {a.name for a in b.pattern.args}
        return {b.var} | (free_vars(b.then) - ys) | free_vars(b.orelse)
    if t is Read:
        out = free_vars(b.target) | free_vars(b.default)
        for br in b.branches:
            out |= free_vars(br.body) - set(variables(br.pattern))
        return out
    raise TypeError(b)


def subst_body(sigma: Mapping[str, Term], b: Body) -> Body:
    """Capture-free substitution into a body (binders shadow)."""
    if not sigma:
        return b
    t = type(b)
    if t in (Var, Cons, Call):
        return apply_subst(sigma, b)
    if t is Stop:
        return b
    if t is Yield:
        return Yield(subst_body(sigma, b.body), b.span)
    if t is Next:
        return Next(apply_subst(sigma, b.call), b.span)
    if t is Assign:
        return Assign(apply_subst(sigma, b.target), apply_subst(sigma, b.expr),
                      subst_body(sigma, b.body), b.span)
    if t is Match:
        var = sigma.get(b.var, Var(b.var))
        inner = {k: v for k, v in sigma.items() if k not in {a.name for a in b.pattern.args}}
        name = var.name if type(var) is Var else b.var
        return Match(name, b.pattern, subst_body(inner, b.then), subst_body(sigma, b.orelse), b.span)
    if t is Read:
        branches = []
        for br in b.branches:
            bound = set(variables(br.pattern))
            inner = {k: v for k, v in sigma.items() if k not in bound}
            branches.append(Branch(br.pattern, subst_body(inner, br.body)))
        return Read(apply_subst(sigma, b.target), tuple(branches),
                    apply_subst(sigma, b.default), b.label, b.span)
    raise TypeError(b)


# ---------------------------------------------------------------------------
# declarations


@dataclass(frozen=True)
class ConstructorSig:
    name: str
    arg_types: tuple
    result: str

    @property
    def arity(self) -> int:
        return len(self.arg_types)


@dataclass(frozen=True)
class RegisterDecl:
    name: str
    reftype: str
    default: Cons


@dataclass(frozen=True)
class TypeDecl:
    """``type t = c of ...`` (functional) or ``reftype t = ref t' with r = v`` (reference)."""

    name: str
    constructors: tuple = ()
    referent: Optional[str] = None
    registers: tuple = ()

    @property
    def is_ref(self) -> bool:
        return self.referent is not None


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple
    param_types: tuple
    ret: Optional[str]
    body: Body
    behaviour: bool = False
    span: Optional[Span] = field(default=None, compare=False, repr=False)

    @property
    def arity(self) -> int:
        return len(self.params)


class DuplicateDeclaration(ValueError):
    pass


@dataclass(frozen=True)
class Program:
    types: tuple
    functions: tuple
    system: tuple = ()
    orders: tuple = ()
    qis: tuple = ()

    def __post_init__(self) -> None:
        seen_types, seen_cons, seen_funs, seen_labels = set(), set(), set(), set()
        for t in self.types:
            if t.name in seen_types:
                raise DuplicateDeclaration(f"type {t.name} declared twice")
            seen_types.add(t.name)
            names = [c.name for c in t.constructors] + [r.name for r in t.registers]
            for c in names:
                if c in seen_cons:
                    raise DuplicateDeclaration(f"constructor {c} declared twice")
                seen_cons.add(c)
        for f in self.functions:
            if f.name in seen_funs or f.name in seen_cons:
                raise DuplicateDeclaration(f"function {f.name} declared twice")
            if len(set(f.params)) != len(f.params):
                raise DuplicateDeclaration(f"function {f.name} has repeated formals")
            seen_funs.add(f.name)
            for r in reads_in(f.body):
                if r.label in seen_labels:
                    raise DuplicateDeclaration(f"read label {r.label} used twice")
                seen_labels.add(r.label)

    # lookups are recomputed on demand; programs are small
    @property
    def type_map(self) -> dict[str, TypeDecl]:
        return {t.name: t for t in self.types}

    @property
    def constructors(self) -> dict[str, ConstructorSig]:
        out = {}
        for t in self.types:
            for c in t.constructors:
                out[c.name] = c
            for r in t.registers:
                out[r.name] = ConstructorSig(r.name, (), t.name)
        return out

    @property
    def registers(self) -> dict[str, RegisterDecl]:
        return {r.name: r for t in self.types for r in t.registers}

    @property
    def function_map(self) -> dict[str, FunctionDef]:
        return {f.name: f for f in self.functions}

    def function(self, name: str) -> FunctionDef:
        return self.function_map[name]

    def is_register(self, name: str) -> bool:
        return any(r.name == name for t in self.types for r in t.registers)

    def referent(self, reftype: str) -> str:
        return self.type_map[reftype].referent

    def labels(self) -> list[str]:
        """All read labels in global (source) order."""
        return [r.label for f in self.functions for r in reads_in(f.body)]

    def initial_store(self) -> dict[str, Cons]:
        return {r.name: r.default for t in self.types for r in t.registers}
