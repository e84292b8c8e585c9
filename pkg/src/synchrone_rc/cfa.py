"""Read-once analysis over the behaviour call graph."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import networkx as nx

from .lang import Assign, Call, Match, Next, Program, Read, Stop, Yield, reads_in


def call_set(b) -> set[str]:
    """Behaviour functions that ``b`` may call within the current instant."""
    t = type(b)
    if t is Stop or t is Next:
        return set()
    if t is Call:
        return {b.name}
    if t is Yield or t is Assign:
        return call_set(b.body)
    if t is Match:
        return call_set(b.then) | call_set(b.orelse)
    if t is Read:
        out: set[str] = set()
        for br in b.branches:
            out |= call_set(br.body)
        return out
    raise TypeError(f"not a behaviour: {b!r}")


@dataclass
class CallGraph:
    graph: nx.DiGraph
    labels: dict  # function -> labels of its reads, in source order
    label_order: list  # every label in the program, in source order
    reach: dict  # function -> R(f) as a set

    def yhat(self, f: str) -> tuple:
        """Ordered label sequence of R(f); empty for expression functions."""
        r = self.reach.get(f, set())
        return tuple(y for y in self.label_order if y in r)


def build_call_graph(prog: Program) -> CallGraph:
    g = nx.DiGraph()
    labels = {}
    for f in prog.functions:
        if f.behaviour:
            g.add_node(f.name)
            labels[f.name] = [r.label for r in reads_in(f.body)]
    for f in prog.functions:
        if f.behaviour:
            for callee in sorted(call_set(f.body)):
                g.add_edge(f.name, callee)
    reach = {}
    for f in g.nodes:
        rs: set[str] = set()
        for h in nx.descendants(g, f) | {f}:
            rs.update(labels[h])
        reach[f] = rs
    return CallGraph(g, labels, prog.labels(), reach)


@dataclass
class ReadOnceReport:
    ok: bool
    witness: Optional[list]  # cycle as a node list, first node repeated at the end
    reach: dict
    yhat: dict

    def render(self) -> str:
        if self.ok:
            return "read-once: pass"
        return "read-once: fail, cycle " + " -> ".join(self.witness)


def _shortest_cycle_through(g: nx.DiGraph, f: str) -> Optional[list]:
    # breadth-first search from the successors of f back to f
    parent = {}
    queue = deque()
    for s in sorted(g.successors(f)):
        if s == f:
            return [f, f]
        if s not in parent:
            parent[s] = f
            queue.append(s)
    while queue:
        u = queue.popleft()
        for v in sorted(g.successors(u)):
            if v == f:
                path = [u]
                while path[-1] != f:
                    path.append(parent[path[-1]])
                path.reverse()
                return path + [f]
            if v not in parent:
                parent[v] = u
                queue.append(v)
    return None


def check_read_once(cg: CallGraph) -> ReadOnceReport:
    g = cg.graph
    best = None
    order = {f: i for i, f in enumerate(g.nodes)}
    for comp in nx.strongly_connected_components(g):
        cyclic = len(comp) > 1 or any(g.has_edge(f, f) for f in comp)
        if not cyclic:
            continue
        for f in sorted(comp, key=order.get):
            if cg.labels[f]:
                cyc = _shortest_cycle_through(g, f)
                if cyc and (best is None or len(cyc) < len(best)):
                    best = cyc
    yhat = {f: cg.yhat(f) for f in g.nodes}
    return ReadOnceReport(best is None, best, dict(cg.reach), yhat)
