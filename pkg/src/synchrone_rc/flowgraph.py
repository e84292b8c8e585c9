"""Flow graph of a bytecode program and the structural properties that
compiled code satisfies.

Nodes are ``(function, index)`` pairs.  Every edge carries a ``kind``:
``succ`` (fall through), ``branch`` (pattern mismatch), ``wait`` (back to
the read), ``next`` (fall through into the next instant) and ``call``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .bytecode import BytecodeProgram

SUCC, BRANCH, WAIT, NEXT, CALL = "succ", "branch", "wait", "next", "call"
_FALLS = {"load", "branch", "build", "call", "read", "write", "yield"}


def flow_graph(bp: BytecodeProgram) -> nx.MultiDiGraph:
    g = nx.MultiDiGraph()
    for s in bp.segments:
        for i, ins in enumerate(s.code, 1):
            g.add_node((s.name, i), ins=ins)
    for s in bp.segments:
        n = len(s.code)
        for i, ins in enumerate(s.code, 1):
            u = (s.name, i)
            if ins.op in _FALLS and i < n:
                g.add_edge(u, (s.name, i + 1), kind=SUCC)
            if ins.op == "branch":
                g.add_edge(u, (s.name, ins.b), kind=BRANCH)
            if ins.op == "wait":
                g.add_edge(u, (s.name, ins.a), kind=WAIT)
            if ins.op in ("wait", "next") and i < n:
                g.add_edge(u, (s.name, i + 1), kind=NEXT)
            if ins.op in ("call", "tcall"):
                g.add_edge(u, (ins.a, 1), kind=CALL)
    return g


def without(g: nx.MultiDiGraph, *kinds: str) -> nx.MultiDiGraph:
    h = nx.MultiDiGraph()
    h.add_nodes_from(g.nodes(data=True))
    h.add_edges_from((u, v, d) for u, v, d in g.edges(data=True) if d["kind"] not in kinds)
    return h


@dataclass(frozen=True)
class Violation:
    prop: str
    node: tuple
    message: str

    def __str__(self) -> str:
        f, i = self.node
        return f"{self.prop}: {f}[{i}]: {self.message}"


@dataclass
class FlowReport:
    violations: list = field(default_factory=list)
    checked: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_property(self, prop: str) -> list:
        return [v for v in self.violations if v.prop == prop]

    def render(self) -> str:
        lines = []
        for p in self.checked:
            bad = self.by_property(p)
            lines.append(f"{p}: pass" if not bad else f"{p}: fail, {bad[0]}")
        return "\n".join(lines) + "\n"


def _segment_nodes(bp: BytecodeProgram, name: str) -> list:
    return [(name, i) for i in range(1, len(bp.segment_map[name].code) + 1)]


def tree_parents(bp: BytecodeProgram, g: nx.MultiDiGraph, name: str) -> dict:
    """Parent map of the segment's tree (no wait or call edges)."""
    t = without(g, WAIT, CALL)
    return {v: u for u, v in t.edges() if u[0] == name}


def check_tree(bp: BytecodeProgram, g: nx.MultiDiGraph) -> list:
    t = without(g, WAIT, CALL)
    out = []
    for s in bp.segments:
        nodes = _segment_nodes(bp, s.name)
        root = (s.name, 1)
        for v in nodes:
            indeg = t.in_degree(v)
            if v == root and indeg:
                out.append(Violation("tree", v, "the entry has a predecessor"))
            elif v != root and indeg != 1:
                out.append(Violation("tree", v, f"{indeg} predecessors"))
        reach = nx.descendants(t, root) | {root}
        for v in nodes:
            if v not in reach:
                out.append(Violation("tree", v, "unreachable from the entry"))
    return out


def check_read_wait(bp: BytecodeProgram, g: nx.MultiDiGraph) -> list:
    out = []
    t = without(g, WAIT, CALL)
    for s in bp.segments:
        for i, ins in enumerate(s.code, 1):
            if ins.op != "wait":
                continue
            j = ins.a
            v = (s.name, i)
            if s.at(j).op != "read":
                out.append(Violation("read-wait", v, f"target {j} is not a read"))
                continue
            # walk back along unique predecessors
            path, w = [], v
            while w != (s.name, j):
                preds = list(t.predecessors(w))
                if len(preds) != 1 or w in path:
                    path = None
                    break
                path.append(w)
                w = preds[0]
            if path is None:
                out.append(Violation("read-wait", v, "no unique path from the read"))
                continue
            if any(s.at(k).op != "branch" for _, k in path[1:]):
                out.append(Violation("read-wait", v, "path from the read leaves the branches"))
    return out


def check_next(bp: BytecodeProgram, g: nx.MultiDiGraph) -> list:
    out = []
    t = without(g, CALL)
    for u, v, d in g.edges(data=True):
        if d["kind"] != NEXT:
            continue
        for w in nx.descendants(t, v) | {v}:
            if bp.segment_map[w[0]].at(w[1]).op == "read":
                out.append(Violation("next", u, f"read at {w[0]}[{w[1]}] reachable after next"))
                break
    return out


def check_read_once(bp: BytecodeProgram, g: nx.MultiDiGraph) -> list:
    out = []
    t = nx.DiGraph(without(g, WAIT, NEXT))
    for comp in nx.strongly_connected_components(t):
        cyclic = len(comp) > 1 or any(t.has_edge(v, v) for v in comp)
        if not cyclic:
            continue
        for v in sorted(comp):
            if bp.segment_map[v[0]].at(v[1]).op == "read":
                out.append(Violation("read-once", v, "read on a loop within an instant"))
    return out


PROPERTIES = ("tree", "read-wait", "next", "read-once")


def check_flow_properties(bp: BytecodeProgram, read_once: bool = True) -> FlowReport:
    g = flow_graph(bp)
    checks = [("tree", check_tree), ("read-wait", check_read_wait), ("next", check_next)]
    if read_once:
        checks.append(("read-once", check_read_once))
    rep = FlowReport(checked=tuple(p for p, _ in checks))
    for _, fn in checks:
        rep.violations.extend(fn(bp, g))
    return rep


def within_instant_reads(bp: BytecodeProgram, g: nx.MultiDiGraph, name: str) -> list:
    """Read nodes reachable from ``(name, 1)`` without wait or next edges,
    ordered by segment then index."""
    t = without(g, WAIT, NEXT)
    reach = nx.descendants(t, (name, 1)) | {(name, 1)}
    pos = {s.name: k for k, s in enumerate(bp.segments)}
    reads = [v for v in reach if bp.segment_map[v[0]].at(v[1]).op == "read"]
    return sorted(reads, key=lambda v: (pos[v[0]], v[1]))


__all__ = [
    "BRANCH", "CALL", "FlowReport", "NEXT", "PROPERTIES", "SUCC", "Violation", "WAIT",
    "check_flow_properties", "flow_graph", "tree_parents", "within_instant_reads", "without",
]
