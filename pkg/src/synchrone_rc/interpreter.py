"""Reference semantics: expression evaluation, behaviour reduction, the
round-robin scheduler and end-of-instant transitions.

A thread is a closure ``(function, body node, environment)``; substituting
the environment into the body gives the behaviour term of the formal
semantics.  Evaluation is environment based and never rewrites terms.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

from .lang import (
    Assign, Call, Cons, Match, Next, Program, Read, Stop, Var, Yield, match_pattern, size,
    subst_body,
)

N, R, S, W = "N", "R", "S", "W"
DEFAULT_FUEL = 10_000_000

sys.setrecursionlimit(max(sys.getrecursionlimit(), 200_000))


class FuelExhausted(RuntimeError):
    pass


class _Fuel:
    __slots__ = ("left", "budget")

    def __init__(self, budget: int):
        self.budget = budget
        self.left = budget

    def tick(self) -> None:
        self.left -= 1
        if self.left < 0:
            raise FuelExhausted(f"more than {self.budget} reduction steps in one instant")


# ---------------------------------------------------------------------------
# expressions


class Evaluator:
    def __init__(self, prog: Program, fuel: Optional[_Fuel] = None,
                 on_value: Optional[Callable[[Cons], None]] = None):
        self.funcs = prog.function_map
        self.fuel = fuel or _Fuel(DEFAULT_FUEL)
        self.on_value = on_value

    def expr(self, e, env: dict) -> Cons:
        t = type(e)
        if t is Var:
            return env[e.name]
        self.fuel.tick()
        if t is Cons:
            if not e.args:
                return e
            return Cons(e.name, tuple(self.expr(a, env) for a in e.args))
        args = tuple(self.expr(a, env) for a in e.args)
        if self.on_value is not None:
            for a in args:
                self.on_value(a)
        f = self.funcs[e.name]
        return self.body(f.body, dict(zip(f.params, args)))

    def body(self, eb, env: dict) -> Cons:
        while type(eb) is Match:
            self.fuel.tick()
            v = env[eb.var]
            p = eb.pattern
            if v.name == p.name and len(v.args) == len(p.args):
                env = dict(env)
                for y, a in zip(p.args, v.args):
                    env[y.name] = a
                eb = eb.then
            else:
                eb = eb.orelse
        return self.expr(eb, env)


def eval_expr(prog: Program, e, env: Optional[dict] = None, fuel: int = DEFAULT_FUEL) -> Cons:
    """Evaluate a closed expression body (or one closed by ``env``)."""
    return Evaluator(prog, _Fuel(fuel)).body(e, dict(env or {}))


# ---------------------------------------------------------------------------
# threads and behaviours


@dataclass
class Thread:
    fn: str
    body: object
    env: dict
    status: str = R
    # per-instant bookkeeping
    start_fn: str = ""
    start_args: tuple = ()
    reads: dict = field(default_factory=dict)
    read_counts: dict = field(default_factory=dict)
    max_size: int = 0

    def behaviour(self):
        """The behaviour term this closure stands for."""
        return subst_body(self.env, self.body)


@dataclass(frozen=True)
class Step:
    thread: int
    status: str
    writes: tuple  # ((register, value), ...)


@dataclass(frozen=True)
class ThreadStart:
    """How a thread began an instant: ``fn(args)`` plus what it read."""

    fn: str
    args: tuple
    reads: dict
    max_size: int
    read_counts: dict


@dataclass
class InstantRecord:
    index: int
    steps: list
    store: dict
    stopped: frozenset
    max_value_size: int
    threads: list  # ThreadStart per thread (None for stopped threads)


@dataclass
class Trace:
    instants: list
    terminated: bool = False
    visited: list = field(default_factory=list)  # (fn, body, env) closures seen

    def render(self) -> str:
        return "".join(render_instant(rec) for rec in self.instants) + (
            "terminated\n" if self.terminated else "")

    def records(self) -> str:
        return "".join(instant_records(rec) for rec in self.instants)


def _show_store(store: dict) -> str:
    return ", ".join(f"{r}={v}" for r, v in store.items())


def render_instant(rec: InstantRecord) -> str:
    out = []
    for st in rec.steps:
        writes = " ".join(f"{r}={v}(|v|={size(v)})" for r, v in st.writes)
        out.append(f"instant {rec.index} | thread {st.thread} | {st.status} | writes {writes}".rstrip())
    out.append(f"instant {rec.index} | store {_show_store(rec.store)}")
    out.append(f"instant {rec.index} | stopped {{{','.join(map(str, sorted(rec.stopped)))}}}")
    return "\n".join(out) + "\n"


def instant_records(rec: InstantRecord) -> str:
    lines = []
    for st in rec.steps:
        lines.append({"kind": "step", "instant": rec.index, "thread": st.thread, "status": st.status,
                      "writes": [{"register": r, "value": str(v), "size": size(v)} for r, v in st.writes]})
    lines.append({"kind": "store", "instant": rec.index,
                  "store": {r: str(v) for r, v in rec.store.items()}})
    lines.append({"kind": "stopped", "instant": rec.index, "threads": sorted(rec.stopped)})
    return "".join(json.dumps(x, sort_keys=True) + "\n" for x in lines)


class Machine:
    """System state plus the reduction rules."""

    def __init__(self, prog: Program, fuel: int = DEFAULT_FUEL, record_visits: bool = False):
        self.prog = prog
        self.funcs = prog.function_map
        self.s0 = prog.initial_store()
        self.store = dict(self.s0)
        self.fuel_budget = fuel
        self.fuel = _Fuel(fuel)
        self.current = 0
        self.instant = 0
        self.record_visits = record_visits
        self.visited: list = []
        self.threads: list[Thread] = []
        for c in prog.system:
            self.threads.append(Thread(c.name, c, {}))
        self._thread: Optional[Thread] = None
        self.ev = Evaluator(prog, self.fuel, self._note)

    def _note(self, v: Cons) -> None:
        th = self._thread
        if th is not None and v._size > th.max_size:
            th.max_size = v._size

    def _visit(self, th: Thread) -> None:
        if self.record_visits:
            self.visited.append((th.fn, th.body, dict(th.env)))

    # b1..b9: run one atomic sequence
    def step_behaviour(self, th: Thread) -> tuple[str, list]:
        self._thread = th
        writes: list = []
        fuel, ev, store = self.fuel, self.ev, self.store
        b, env = th.body, th.env
        while True:
            fuel.tick()
            t = type(b)
            if t is Stop:
                th.body, th.env = b, env
                return S, writes
            if t is Yield:
                th.body, th.env = b.body, env
                return R, writes
            if t is Next:
                th.body, th.env = b.call, env
                return N, writes
            if t is Call:
                args = tuple(ev.expr(a, env) for a in b.args)
                for a in args:
                    self._note(a)
                f = self.funcs[b.name]
                th.fn = f.name
                b, env = f.body, dict(zip(f.params, args))
                continue
            if t is Assign:
                v = ev.expr(b.expr, env)
                self._note(v)
                r = b.target.name if type(b.target) is Cons else env[b.target.name].name
                store[r] = v
                writes.append((r, v))
                b = b.body
                continue
            if t is Match:
                v = env[b.var]
                p = b.pattern
                if v.name == p.name and len(v.args) == len(p.args):
                    env = dict(env)
                    for y, a in zip(p.args, v.args):
                        env[y.name] = a
                    b = b.then
                else:
                    b = b.orelse
                continue
            if t is Read:
                r = b.target.name if type(b.target) is Cons else env[b.target.name].name
                v = store[r]
                for br in b.branches:
                    sigma = match_pattern(br.pattern, v)
                    if sigma is not None:
                        th.reads[b.label] = v
                        th.read_counts[b.label] = th.read_counts.get(b.label, 0) + 1
                        self._note(v)
                        env = {**env, **sigma}
                        b = br.body
                        break
                else:
                    th.body, th.env = b, env
                    return W, writes
                continue
            raise TypeError(f"not a behaviour: {b!r}")

    def eligible(self, k: int) -> bool:
        th = self.threads[k]
        if th.status == R:
            return True
        if th.status == W:
            b = th.body
            r = b.target.name if type(b.target) is Cons else th.env[b.target.name].name
            v = self.store[r]
            return any(match_pattern(br.pattern, v) is not None for br in b.branches)
        return False

    def scheduler_next(self, start: Optional[int] = None) -> Optional[int]:
        """First eligible index scanning cyclically from ``current + 1``
        (or from ``start`` inclusive); None marks the end of the instant."""
        n = len(self.threads)
        first = (self.current + 1) % n if start is None else start
        for d in range(n):
            k = (first + d) % n
            if self.eligible(k):
                return k
        return None

    def begin_instant(self) -> None:
        self.fuel = _Fuel(self.fuel_budget)
        self.ev.fuel = self.fuel
        side = Evaluator(self.prog, _Fuel(self.fuel_budget))
        for th in self.threads:
            th.reads, th.read_counts, th.max_size = {}, {}, 0
            if th.status == S:
                th.start_fn, th.start_args = th.fn, ()
                continue
            # every live thread starts an instant on a call f(e); its
            # arguments are the instant's parameters
            b = th.body
            args = tuple(side.expr(a, th.env) for a in b.args)
            th.start_fn, th.start_args = b.name, args
            th.max_size = max((a._size for a in args), default=0)
            if self.instant > 0:
                self._visit(th)

    def end_of_instant(self) -> bool:
        """U: N -> R, W -> default call with R; store reset.  Returns True if
        every thread is stopped."""
        for th in self.threads:
            if th.status == N:
                th.status = R
            elif th.status == W:
                th.body = th.body.default
                th.status = R
        self.store = dict(self.s0)
        self.current = 0
        return all(th.status == S for th in self.threads)

    def run_instant(self) -> InstantRecord:
        self.begin_instant()
        steps = []
        k = self.scheduler_next(start=0)
        while k is not None:
            th = self.threads[k]
            th.status = R
            self.current = k
            x, writes = self.step_behaviour(th)
            th.status = x
            self._visit(th)
            steps.append(Step(k, x, tuple(writes)))
            k = self.scheduler_next()
        sizes = [th.max_size for th in self.threads] + [v._size for v in self.store.values()]
        sizes += [v._size for v in self.s0.values()]
        rec = InstantRecord(
            self.instant, steps, dict(self.store),
            frozenset(i for i, th in enumerate(self.threads) if th.status == S),
            max(sizes, default=0),
            [ThreadStart(th.start_fn, th.start_args, dict(th.reads), th.max_size, dict(th.read_counts))
             for th in self.threads],
        )
        self.instant += 1
        return rec


def run(prog: Program, instants: int, fuel: int = DEFAULT_FUEL, record_visits: bool = False) -> Trace:
    """Run ``instants`` instants (fewer if every thread stops)."""
    m = Machine(prog, fuel, record_visits)
    trace = Trace([])
    for _ in range(instants):
        if all(th.status == S for th in m.threads):
            trace.terminated = True
            break
        trace.instants.append(m.run_instant())
        if m.end_of_instant():
            trace.terminated = True
            break
    trace.visited = m.visited
    return trace
