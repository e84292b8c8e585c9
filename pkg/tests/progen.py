"""Seeded generator of random well-typed programs.

Instants always terminate: an expression function recurses only through
its first parameter, on a subterm just matched from it, and otherwise calls
lower-numbered functions,
and within an instant a behaviour only calls higher-numbered behaviours
(calls after ``next`` or in a read default may go anywhere).
"""

import random
from dataclasses import dataclass, field

HEADER = """\
type nat = z || s of nat
type bool = false || true
type list = nil || cons of (nat, list)
reftype natref = ref nat with r0 = z || r1 = s(z)
reftype boolref = ref bool with flag = false
reftype listref = ref list with q = nil
"""

TYPES = ("nat", "bool", "list")
REGISTERS = {"r0": "nat", "r1": "nat", "flag": "bool", "q": "list"}
CONSTRUCTORS = {
    "nat": [("z", ()), ("s", ("nat",))],
    "bool": [("false", ()), ("true", ())],
    "list": [("nil", ()), ("cons", ("nat", "list"))],
}


@dataclass
class Sig:
    name: str
    params: tuple
    result: str = "beh"


@dataclass
class Gen:
    seed: int
    rng: random.Random = field(init=False)
    fresh: int = 0

    def __post_init__(self):
        self.rng = random.Random(self.seed)

    def var(self) -> str:
        self.fresh += 1
        return f"v{self.fresh}"

    # -- expressions -------------------------------------------------------

    def expr(self, ty: str, env: dict, funs: list, depth: int) -> str:
        r = self.rng
        vs = [x for x, t in env.items() if t == ty]
        callable_ = [f for f in funs if f.result == ty]
        choice = r.random()
        if vs and (depth <= 0 or choice < 0.4):
            return r.choice(vs)
        if callable_ and depth > 0 and choice < 0.65:
            f = r.choice(callable_)
            return f"{f.name}({', '.join(self.expr(t, env, funs, depth - 1) for t in f.params)})"
        cons = CONSTRUCTORS[ty]
        name, args = cons[0] if depth <= 0 else r.choice(cons)
        if not args:
            return name
        return f"{name}({', '.join(self.expr(t, env, funs, depth - 1) for t in args)})"

    def pattern(self, ty: str) -> tuple:
        """A shallow constructor pattern and the variables it binds."""
        name, args = self.rng.choice(CONSTRUCTORS[ty])
        binds = {self.var(): t for t in args}
        text = f"{name}({', '.join(binds)})" if binds else name
        return text, binds

    def function(self, k: int, funs: list) -> tuple:
        params = tuple(self.rng.choice(TYPES) for _ in range(self.rng.randint(1, 3)))
        sig = Sig(f"g{k}", params, self.rng.choice(TYPES))
        names = [self.var() for _ in params]
        env = dict(zip(names, params))
        body = self.fun_body(sig, names, env, funs, 2)
        decl = ", ".join(f"{x} : {t}" for x, t in env.items())
        return sig, f"def {sig.name}({decl}) : {sig.result} =\n    {body}\n"

    def fun_body(self, sig, slots, env, funs, depth) -> str:
        """``slots[j]`` is the variable currently standing for parameter j."""
        r = self.rng
        live = [j for j, x in enumerate(slots) if x is not None]
        if depth <= 0 or not live or r.random() < 0.3:
            return self.expr(sig.result, env, funs, 2)
        i = r.choice(live)
        x, ty = slots[i], env[slots[i]]
        pat, binds = self.pattern(ty)
        inner = {k: v for k, v in env.items() if k != x}
        inner.update(binds)
        smaller = [b for b, t in binds.items() if t == ty]
        if i == 0 and smaller and r.random() < 0.5:
            # recursion only through the first parameter, which strictly shrinks
            args = [smaller[0]] + [self.expr(t, inner, funs, 1) for t in sig.params[1:]]
            then = f"{sig.name}({', '.join(args)})"
            if sig.result != ty or r.random() < 0.5:
                then = self.wrap(sig.result, then, inner, funs)
        else:
            rest = [None if j == i else y for j, y in enumerate(slots)]
            then = self.fun_body(sig, rest, inner, funs, depth - 1)
        other = self.expr(sig.result, env, funs, 2)
        return f"match {x} with {pat} then {then} else {other}"

    def wrap(self, ty: str, inner: str, env: dict, funs: list) -> str:
        if ty == "nat":
            return f"s({inner})"
        if ty == "list":
            return f"cons({self.expr('nat', env, funs, 1)}, {inner})"
        return inner

    # -- behaviours ----------------------------------------------------------

    def call(self, targets: list, env: dict, funs: list) -> str:
        b = self.rng.choice(targets)
        return f"{b.name}({', '.join(self.expr(t, env, funs, 2) for t in b.params)})"

    def beh_body(self, k: int, behs: list, env: dict, funs: list, depth: int) -> str:
        r = self.rng
        later = behs[k + 1:]
        options = ["stop", "next", "yield", "write", "read", "match"]
        if later:
            options.append("call")
        op = r.choice(options) if depth > 0 else r.choice(["stop", "next"] + (["call"] if later else []))
        if op == "stop":
            return "stop"
        if op == "next":
            return f"next. {self.call(behs, env, funs)}"
        if op == "call":
            return self.call(later, env, funs)
        if op == "yield":
            return f"yield. {self.beh_body(k, behs, env, funs, depth - 1)}"
        if op == "write":
            reg = r.choice(sorted(REGISTERS))
            return f"{reg} := {self.expr(REGISTERS[reg], env, funs, 2)}. {self.beh_body(k, behs, env, funs, depth - 1)}"
        if op == "match":
            vs = sorted(env)
            if not vs:
                return "stop"
            x = r.choice(vs)
            pat, binds = self.pattern(env[x])
            inner = {v: t for v, t in env.items() if v != x}
            inner.update(binds)
            then = self.beh_body(k, behs, inner, funs, depth - 1)
            other = self.beh_body(k, behs, env, funs, depth - 1)
            return f"match {x} with {pat} then {then} else {other}"
        reg = r.choice(sorted(REGISTERS))
        ty = REGISTERS[reg]
        label = f"<{self.var()}>" if r.random() < 0.5 else ""
        branches = []
        for _ in range(r.randint(1, 2)):
            pat, binds = self.pattern(ty)
            branches.append((pat, binds))
        if r.random() < 0.4:
            # a variable pattern catches everything, so it goes last
            y = self.var()
            branches.append((y, {y: ty}))
        arms = []
        for pat, binds in branches:
            inner = dict(env)
            inner.update(binds)
            arms.append(f"{pat} => {self.beh_body(k, behs, inner, funs, depth - 1)}")
        arms.append(f"[_] => {self.call(behs, env, funs)}")
        return f"read{label} {reg} with " + " | ".join(arms)

    def program(self) -> str:
        r = self.rng
        funs, decls = [], []
        for k in range(r.randint(0, 3)):
            sig, text = self.function(k, funs)
            decls.append(text)
            funs.append(sig)
        behs = [Sig(f"b{k}", tuple(r.choice(TYPES) for _ in range(r.randint(0, 2))))
                for k in range(r.randint(1, 4))]
        for k, b in enumerate(behs):
            names = [self.var() for _ in b.params]
            env = dict(zip(names, b.params))
            body = self.beh_body(k, behs, env, funs, 3)
            decl = ", ".join(f"{x} : {t}" for x, t in env.items())
            decls.append(f"beh {b.name}({decl}) =\n    {body}\n")
        threads = [b for b in behs if b is behs[0] or r.random() < 0.5]
        system = ", ".join(self.call([b], {}, []) for b in threads)
        return HEADER + "\n" + "\n".join(decls) + f"\nsystem = {system}\n"


def random_program(seed: int) -> str:
    return Gen(seed).program()
