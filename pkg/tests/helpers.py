"""Shared helpers for the test modules."""

from dataclasses import dataclass

from synchrone_rc import corpus
from synchrone_rc.cfa import build_call_graph, check_read_once
from synchrone_rc.compiler import compile_program
from synchrone_rc.control_points import constraints, program_control_points
from synchrone_rc.lang import hat
from synchrone_rc.quasi import Assignment, BudgetExceeded, check_assignment, parse_assignment, synthesize
from synchrone_rc.termination import BoundExceeded, check_termination, parse_precedence, search_precedence

CORPUS = corpus.names()

# PASS/FAIL lines of the acceptance criteria, printed in the terminal summary
ACCEPTANCE: list = []


def behaviours(prog):
    return [f.name for f in prog.functions if f.behaviour]


def analysed(prog):
    """(call graph, control points, constraints) of a typed program."""
    cg = build_call_graph(prog)
    cps = program_control_points(prog, cg)
    return cg, cps, constraints(cps, cg)


def sidecar_precedence(name, prog):
    lines = corpus.sidecar(name, "prec")
    return parse_precedence(lines, behaviours(prog)) if lines else None


def sidecar_assignment(name, prog, cg):
    lines = corpus.sidecar(name, "qi")
    if not lines:
        return None
    return Assignment.for_program(prog, cg, parse_assignment(lines, behaviours(prog)))


@dataclass
class Certified:
    """A corpus program with the precedence and assignment that validate it."""

    name: str
    prog: object
    cg: object
    cs: list
    prec: object
    q: object


def certify(name):
    """Run termination and quasi-interpretation on a corpus program; None
    when either fails or read-once does."""
    prog = corpus.load(name)
    cg, _, cs = analysed(prog)
    if not check_read_once(cg).ok:
        return None
    prec = sidecar_precedence(name, prog)
    if prec is None:
        try:
            prec = search_precedence(cs)
        except BoundExceeded:
            return None
    if prec is None or not check_termination(cs, prec).ok:
        return None
    hats = [hat(f) for f in behaviours(prog)]
    q = sidecar_assignment(name, prog, cg)
    if q is None:
        try:
            q = synthesize(cs, Assignment.for_program(prog, cg), extra=hats)
        except BudgetExceeded:
            return None
    if not check_assignment(q, cs, extra=hats).ok:
        return None
    return Certified(name, prog, cg, cs, prec, q)
