"""Termination of instants by a lexicographic path order.

Function symbols sit above every constructor, constructors are mutually
incomparable, function arguments are compared lexicographically from left to
right and constructor arguments with the product order.  The precedence on
function symbols is a quasi-order: symbols in the same class share a priority.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .control_points import Constraint, constraint_symbols
from .lang import Call, Var, hat


class BoundExceeded(ValueError):
    """Too many symbols for exhaustive precedence search."""


@dataclass
class Precedence:
    """Priority classes plus a strict order between them.

    ``cls`` maps a symbol to its class id; ``gt`` holds pairs of class ids
    ``(a, b)`` meaning class a is above class b, transitively closed.
    """

    cls: dict = field(default_factory=dict)
    gt: set = field(default_factory=set)

    @classmethod
    def from_ranks(cls, ranks: dict) -> "Precedence":
        # each distinct rank is a class; higher rank is bigger
        gt = {(a, b) for a in set(ranks.values()) for b in set(ranks.values()) if a > b}
        return cls(dict(ranks), gt)

    @classmethod
    def chain(cls, *levels) -> "Precedence":
        """``chain(["f^"], ["g", "h"])`` gives f^ > g = h."""
        ranks = {}
        for i, level in enumerate(levels):
            for s in ([level] if isinstance(level, str) else level):
                ranks[s] = len(levels) - i
        return cls.from_ranks(ranks)

    def _class(self, f: str):
        return self.cls.get(f, ("own", f))

    def compare(self, f: str, g: str) -> Optional[str]:
        if f == g:
            return "="
        a, b = self._class(f), self._class(g)
        if a == b:
            return "="
        if (a, b) in self.gt:
            return ">"
        if (b, a) in self.gt:
            return "<"
        return None

    def same(self, f: str, g: str) -> bool:
        return self.compare(f, g) == "="

    def classes(self) -> list[list[str]]:
        """Classes from top to bottom (by number of classes below)."""
        groups: dict = {}
        for s, c in self.cls.items():
            groups.setdefault(c, []).append(s)
        below = {c: sum(1 for (a, _) in self.gt if a == c) for c in groups}
        return [sorted(groups[c]) for c in sorted(groups, key=lambda c: (-below[c], str(c)))]

    def render(self) -> str:
        levels = self.classes()
        if not levels:
            return "(empty)"
        ids = [self.cls[level[0]] for level in levels]
        name = {c: " = ".join(level) for c, level in zip(ids, levels)}
        if all((a, b) in self.gt for a, b in zip(ids, ids[1:])):
            return " > ".join(name[c] for c in ids)
        # not a chain: print the covering relation as maximal chains
        cover = sorted(((a, b) for (a, b) in self.gt
                        if not any((a, c) in self.gt and (c, b) in self.gt for c in ids)),
                       key=lambda p: (ids.index(p[0]), ids.index(p[1])))
        succ: dict = {}
        pred: dict = {}
        for a, b in cover:
            succ.setdefault(a, []).append(b)
            pred.setdefault(b, []).append(a)
        parts, used = [], set()
        for a, b in cover:
            if (a, b) in used:
                continue
            chain = [a, b]
            used.add((a, b))
            while len(succ.get(chain[-1], ())) == 1 and len(pred.get(succ[chain[-1]][0], ())) == 1:
                nxt = succ[chain[-1]][0]
                used.add((chain[-1], nxt))
                chain.append(nxt)
            parts.append(" > ".join(name[c] for c in chain))
        touched = {c for pair in cover for c in pair}
        parts += [name[c] for c in ids if c not in touched]
        return "; ".join(parts)


def parse_precedence(lines: Iterable[str], behaviours: Iterable[str] = ()) -> Precedence:
    """Parse ``order`` lines such as ``f^ > g = h > k``.  A bare behaviour
    name stands for its hatted symbol."""
    behaviours = set(behaviours)
    parent: dict = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            x = parent[x]
        return x

    edges = []
    for line in lines:
        line = line.strip()
        if line.startswith("order"):
            line = line[len("order"):]
        levels = [lv.strip() for lv in line.split(">")]
        groups = []
        for lv in levels:
            names = [n.strip() for n in lv.split("=") if n.strip()]
            if not names:
                raise ValueError(f"malformed order line: {line!r}")
            for n in names:
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*\^?", n):
                    raise ValueError(f"bad symbol in order line: {n!r}")
            names = [hat(n) if n in behaviours else n for n in names]
            for n in names[1:]:
                parent[find(n)] = find(names[0])
            find(names[0])
            groups.append(names[0])
        edges.extend(zip(groups, groups[1:]))
    cls = {s: find(s) for s in list(parent)}
    gt = {(cls[a], cls[b]) for a, b in edges}
    # transitive closure over classes
    changed = True
    while changed:
        changed = False
        for (a, b), (c, d) in itertools.product(list(gt), list(gt)):
            if b == c and (a, d) not in gt:
                gt.add((a, d))
                changed = True
    if any(a == b for a, b in gt):
        raise ValueError("precedence is cyclic")
    return Precedence(cls, gt)


# ---------------------------------------------------------------------------
# the order


def _is_fun(t) -> bool:
    return type(t) is Call


def lpo_greater(s, t, prec: Precedence) -> bool:
    """s > t in the path order induced by ``prec``."""
    if type(s) is Var:
        return False
    # some argument of s is >= t
    for a in s.args:
        if a == t or lpo_greater(a, t, prec):
            return True
    if type(t) is Var:
        return False
    if _is_fun(s):
        if not _is_fun(t):
            return all(lpo_greater(s, b, prec) for b in t.args)
        rel = prec.compare(s.name, t.name)
        if rel == ">":
            return all(lpo_greater(s, b, prec) for b in t.args)
        if rel == "=":
            return _lex_greater(s.args, t.args, prec) and all(lpo_greater(s, b, prec) for b in t.args)
        return False
    # s is a constructor term: only the product case is left
    if _is_fun(t) or s.name != t.name or len(s.args) != len(t.args):
        return False
    strict = False
    for a, b in zip(s.args, t.args):
        if a == b:
            continue
        if not lpo_greater(a, b, prec):
            return False
        strict = True
    return strict


def _lex_greater(xs: tuple, ys: tuple, prec: Precedence) -> bool:
    for a, b in zip(xs, ys):
        if a == b:
            continue
        return lpo_greater(a, b, prec)
    return len(xs) > len(ys)


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class TerminationVerdict:
    ok: bool
    precedence: Optional[Precedence]
    failed: Optional[Constraint] = None
    linear: bool = False

    def render(self) -> str:
        if self.ok:
            lin = "yes" if self.linear else "no"
            return f"termination: pass, precedence {self.precedence.render()}, linear {lin}"
        if self.failed is None:
            return "termination: fail, no precedence found"
        return f"termination: fail at {self.failed}"


def _index0(cs: Iterable[Constraint]) -> list[Constraint]:
    return [c for c in cs if c.index == 0]


def check_termination(cs: Iterable[Constraint], prec: Precedence) -> TerminationVerdict:
    cs = list(cs)
    for c in _index0(cs):
        if not lpo_greater(c.lhs, c.rhs, prec):
            return TerminationVerdict(False, prec, c)
    return TerminationVerdict(True, prec, None, check_linear_lpo(cs, prec))


def check_linear_lpo(cs: Iterable[Constraint], prec: Precedence) -> bool:
    """Every index-0 rhs holds at most one symbol of the lhs head's priority."""
    for c in _index0(cs):
        n = 0
        stack = [c.rhs]
        while stack:
            u = stack.pop()
            if type(u) is Var:
                continue
            if type(u) is Call and prec.same(u.name, c.lhs.name):
                n += 1
            stack.extend(u.args)
        if n > 1:
            return False
    return True


def _funs(t) -> set[str]:
    out = set()
    stack = [t]
    while stack:
        u = stack.pop()
        if type(u) is Call:
            out.add(u.name)
        if type(u) is not Var:
            stack.extend(u.args)
    return out


def search_precedence(cs: Iterable[Constraint], bound: int = 8) -> Optional[Precedence]:
    """First precedence, in a fixed enumeration of ordered partitions with
    the fewest classes first, under which every index-0 constraint holds."""
    cs = _index0(cs)
    syms = constraint_symbols(cs)
    if len(syms) > bound:
        raise BoundExceeded(f"{len(syms)} function symbols exceed the search bound {bound}; "
                            f"give an explicit order")
    if not cs:
        return Precedence()
    pos = {s: i for i, s in enumerate(syms)}
    # a constraint is checked once its last symbol gets a rank
    due: dict = {}
    # the lhs head can never be below a function symbol of its rhs
    floors: dict = {}
    for c in cs:
        involved = _funs(c.lhs) | _funs(c.rhs)
        last = max(pos[s] for s in involved)
        due.setdefault(last, []).append(c)
        for g in _funs(c.rhs):
            floors.setdefault(max(pos[g], pos[c.lhs.name]), []).append((c.lhs.name, g))

    n = len(syms)
    for k in range(1, n + 1):
        ranks: dict = {}

        def ok_at(i: int) -> bool:
            for f, g in floors.get(i, ()):
                if ranks[f] < ranks[g]:
                    return False
            prec = Precedence.from_ranks(ranks)
            return all(lpo_greater(c.lhs, c.rhs, prec) for c in due.get(i, ()))

        def go(i: int) -> bool:
            if i == n:
                return len(set(ranks.values())) == k
            used = len(set(ranks.values()))
            if k - used > n - i:
                return False
            for r in range(k):
                ranks[syms[i]] = r
                if ok_at(i) and go(i + 1):
                    return True
            del ranks[syms[i]]
            return False

        if go(0):
            return Precedence.from_ranks(dict(ranks))
    return None


__all__ = [
    "BoundExceeded", "Precedence", "TerminationVerdict", "check_linear_lpo", "check_termination",
    "lpo_greater", "parse_precedence", "search_precedence",
]
