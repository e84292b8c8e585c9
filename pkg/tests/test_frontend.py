import random

import pytest

from helpers import CORPUS
from synchrone_rc import corpus
from synchrone_rc.frontend import DiagnosticError, load, parse, parse_with_diagnostics, pretty, typecheck
from synchrone_rc.lang import Read, reads_in

NAT = "type nat = z || s of nat\n"


def error_codes(text):
    try:
        load(text)
    except DiagnosticError as exc:
        return exc.codes
    return []


def test_alarm_has_one_behaviour_of_arity_two():
    prog = corpus.load("alarm")
    behs = [f for f in prog.functions if f.behaviour]
    assert [(f.name, f.arity) for f in behs] == [("alarm", 2)]


def test_type_declaration():
    prog = parse(NAT)
    (t,) = prog.types
    assert t.name == "nat"
    assert [c.name for c in t.constructors] == ["z", "s"]
    assert [c.arity for c in t.constructors] == [0, 1]


def test_unknown_function():
    assert "unknown-symbol" in error_codes(NAT + "def f(x : nat) : nat = g(x)\n")


def test_monitor_accepted():
    prog = corpus.load("monitor")
    assert {f.name for f in prog.functions} >= {"f", "f1", "max", "maxl"}


def test_constructor_argument_type_error():
    text = NAT + "type list = nil || cons of (nat, list)\ndef f(x : nat) : nat = s(nil)\n"
    assert "type" in error_codes(text)


def test_match_scope_violations_on_both_branches():
    text = NAT + "def f(x : nat) : nat = match x with s(y) then x else y\n"
    with pytest.raises(DiagnosticError) as exc:
        load(text)
    scope = [d for d in exc.value.diagnostics if d.code == "scope"]
    assert len(scope) == 2


def test_syntax_error_has_position():
    prog, diags = parse_with_diagnostics(NAT + "def f(x : nat) : nat = \n")
    assert prog is None
    assert diags and diags[0].line >= 2 and diags[0].code == "syntax"


def test_default_branch_is_mandatory():
    text = NAT + "reftype natref = ref nat with r = z\nbeh f() = read r with s(x) => stop\n"
    assert error_codes(text)


def test_labels_follow_source_order():
    prog = corpus.load("readers_writers")
    labels = prog.labels()
    assert len(labels) == len(set(labels))
    assert labels == [r.label for f in prog.functions for r in reads_in(f.body)]


def test_explicit_label_kept():
    prog = corpus.load("alarm")
    (r,) = reads_in(prog.function("alarm").body)
    assert isinstance(r, Read) and r.label == "u"


def test_behaviour_in_expression_position():
    text = NAT + "beh b() = stop\ndef f(x : nat) : nat = b()\n"
    assert "beh-position" in error_codes(text)


@pytest.mark.parametrize("name", CORPUS)
def test_pretty_print_round_trip(name):
    p1 = parse(corpus.source(name))
    text = pretty(p1)
    p2 = parse(text)
    assert p2 == p1
    assert pretty(p2) == text


@pytest.mark.parametrize("name", CORPUS)
def test_typecheck_ignores_declaration_order(name):
    prog = parse(corpus.source(name))
    funcs = list(prog.functions)
    random.Random(7).shuffle(funcs)
    shuffled = type(prog)(prog.types[::-1], tuple(funcs), prog.system, prog.orders, prog.qis)
    a = {f.name: (f.param_types, f.ret) for f in typecheck(prog).functions}
    b = {f.name: (f.param_types, f.ret) for f in typecheck(shuffled).functions}
    assert a == b


def test_inferred_parameter_types():
    prog = load(NAT + "def dble(n) = match n with s(m) then s(s(dble(m))) else z\n")
    assert prog.function("dble").param_types == ("nat",)
    assert prog.function("dble").ret == "nat"
