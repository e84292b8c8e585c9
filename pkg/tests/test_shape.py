import pytest

from helpers import CORPUS, analysed, sidecar_assignment, sidecar_precedence
from synchrone_rc import corpus
from synchrone_rc.bytecode import BytecodeProgram, Instruction, Segment, parse_bytecode
from synchrone_rc.compiler import compile_program
from synchrone_rc.control_points import canonical
from synchrone_rc.lang import Call, Var, match_pattern
from synchrone_rc.shape import analyse, verify
from synchrone_rc.vm import VM

MONITOR_F = "1: yield\n2: read i\n3: load 2\n4: load 1\n5: call maxl 2\n6: tcall f1 1\n"
LISTED_F = "1: yield\n2: read i\n3: load 1\n4: call maxl 2\n5: call f1 1\n6: return\n"
LISTED_TABLE = """\
1: yield | x[1,1]
2: read i | x[1,1]
3: load 1 | x[1,1] . x[f,2]
4: call maxl 2 | x[1,1] . x[f,2] . x[1,1]
5: call f1 1 | x[1,1] . maxl(x[f,2], x[1,1])
6: return | x[1,1] . f1(maxl(x[f,2], x[1,1]))"""


def monitor_text(f_code=MONITOR_F):
    text = compile_program(corpus.load("monitor")).render()
    assert MONITOR_F in text
    return text.replace(MONITOR_F, f_code)


def test_build_then_return():
    types = corpus.load("alarm").types
    seg = Segment("g", 0, (), "nat", (Instruction("build", "z", 0), Instruction("return")))
    rep = analyse(BytecodeProgram(types, (seg,)))
    assert rep.ok
    assert rep.segments["g"].render() == "1: build z 0 | (empty)\n2: return | z"
    assert [str(c) for c in rep.constraints] == ["g() >0 z"]


class TestAlarm:
    def setup_method(self):
        self.seg = analyse(compile_program(corpus.load("alarm"))).segments["alarm"]

    def test_successful_branch_refines_the_formal(self):
        assert [str(s) for s in self.seg.rows[2].sigma] == ["x[1,1]", "s(x[2,2])"]
        assert [str(s) for s in self.seg.rows[12].sigma] == ["x[1,1]", "x[1,2]"]

    def test_read_pushes_a_fresh_variable(self):
        assert str(self.seg.rows[3].stack[-1]) == "x[alarm,2]"

    def test_single_write_constraint(self):
        assert [str(c) for c in self.seg.constraints] == ["alarm^(x[1,1], x[1,2], x[alarm,2]) >1 prst"]


def test_monitor_f_constraint():
    seg = analyse(compile_program(corpus.load("monitor"))).segments["f"]
    assert [str(c) for c in seg.constraints] == ["f^(x[1,1], x[f,2]) >0 f1^(maxl(x[f,2], x[1,1]))"]


def test_listed_monitor_f_table():
    rep = analyse(parse_bytecode(monitor_text(LISTED_F)))
    seg = rep.segments["f"]
    assert rep.ok
    assert seg.render() == LISTED_TABLE
    # same constraint as the compiler's tail-call form
    assert [str(c) for c in seg.constraints] == ["f^(x[1,1], x[f,2]) >0 f1^(maxl(x[f,2], x[1,1]))"]


def test_maxl_matches_source_constraints():
    prog = corpus.load("monitor")
    src = {canonical(c) for c in analysed(prog)[2] if c.lhs.name == "maxl"}
    byt = {canonical(c) for c in analyse(compile_program(prog)).segments["maxl"].constraints}
    assert src == byt and len(src) == 2


@pytest.mark.parametrize("name", [n for n in CORPUS if n != "exp"])
def test_bytecode_constraints_agree_with_source(name):
    prog = corpus.load(name)
    src = {canonical(c) for c in analysed(prog)[2]}
    byt = {canonical(c) for c in analyse(compile_program(prog)).constraints}
    assert src == byt


@pytest.mark.parametrize("name", [n for n in CORPUS if n != "exp"])
def test_corpus_verifies(name):
    prog = corpus.load(name)
    cg = analysed(prog)[0]
    q = sidecar_assignment(name, prog, cg)
    rep = verify(compile_program(prog), prec=sidecar_precedence(name, prog),
                 qi_entries=q.funcs if q else None)
    assert rep.ok, rep.render()
    assert [s.name for s in rep.stages] == [
        "structure", "flow", "shape", "termination", "quasi-interpretation"]


def test_exp_stops_at_read_once():
    rep = verify(compile_program(corpus.load("exp")))
    assert rep.first_failure.name == "flow"
    assert "read-once" in rep.first_failure.detail
    assert rep.stage("termination") is None


def test_extra_load_is_a_shape_error():
    text = monitor_text(MONITOR_F.replace("3: load 2\n", "3: load 5\n"))
    rep = analyse(parse_bytecode(text))
    assert not rep.ok
    assert {e.segment for e in rep.errors} == {"f"}


def test_wrong_arity_call_is_rejected():
    text = monitor_text(MONITOR_F.replace("call maxl 2", "call maxl 1"))
    rep = verify(parse_bytecode(text))
    assert rep.first_failure is not None and rep.first_failure.name in ("structure", "shape")


def test_max_height_is_the_tallest_row():
    rep = analyse(compile_program(corpus.load("monitor")))
    assert rep.max_height == max(len(r.stack) for s in rep.segments.values() for r in s.rows.values())


@pytest.mark.parametrize("name", CORPUS)
def test_runtime_stacks_are_instances_of_the_rows(name):
    bp = compile_program(corpus.load(name))
    rep = analyse(bp)
    seen = []

    def hook(tid, frame, ins):
        row = rep.segments[frame.fn].rows[frame.pc]
        assert len(row.stack) == len(frame.stack)
        sigma = {}
        for term, v in zip(row.stack, frame.stack):
            if _has_call(term):
                continue
            m = match_pattern(term, v)
            assert m is not None, (frame.fn, frame.pc, str(term), str(v))
            for k, w in m.items():
                assert sigma.setdefault(k, w) == w
        seen.append(frame.pc)

    vm = VM(bp, hook=hook)
    for _ in range(5):
        vm.run_instant()
        if vm.finished:
            break
    assert seen


def _has_call(t):
    if type(t) is Var:
        return False
    return type(t) is Call or any(_has_call(a) for a in t.args)
