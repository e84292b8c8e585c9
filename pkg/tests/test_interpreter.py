import pytest

from helpers import CORPUS, analysed
from synchrone_rc import corpus
from synchrone_rc.cfa import check_read_once
from synchrone_rc.frontend import load
from synchrone_rc.interpreter import N, R, S, W, FuelExhausted, Machine, eval_expr, run
from synchrone_rc.lang import Call, Read, Stop, reads_in, size, value

Z = value("z")
NIL = value("nil")


def s(v):
    return value("s", v)


def nat(k):
    v = Z
    for _ in range(k):
        v = s(v)
    return v


def as_int(v):
    n = 0
    while v.name == "s":
        v, n = v.args[0], n + 1
    return n


def as_list(xs):
    v = NIL
    for x in reversed(xs):
        v = value("cons", nat(x), v)
    return v


MONITOR = corpus.load("monitor")


class TestExpressions:
    def test_dble(self):
        prog = corpus.load("exp")
        assert eval_expr(prog, Call("dble", (s(Z),))) == s(s(Z))

    def test_dble_base_case(self):
        prog = corpus.load("exp")
        assert eval_expr(prog, Call("dble", (Z,))) == Z

    def test_maxl(self):
        assert eval_expr(MONITOR, Call("maxl", (as_list([1]), Z))) == s(Z)

    @pytest.mark.parametrize("xs,x", [([], 3), ([2, 5, 1], 0), ([4, 4], 4), ([0, 7, 3], 6)])
    def test_maxl_against_builtin_max(self, xs, x):
        got = eval_expr(MONITOR, Call("maxl", (as_list(xs), nat(x))))
        assert as_int(got) == max(xs + [x])

    def test_values_evaluate_to_themselves(self):
        v = value("cons", s(Z), NIL)
        assert eval_expr(MONITOR, v) == v

    def test_fuel(self):
        prog = load("type nat = z || s of nat\ndef loop(x : nat) : nat = loop(x)\n")
        with pytest.raises(FuelExhausted):
            eval_expr(prog, Call("loop", (Z,)), fuel=1000)


ONE_PLACE = """
type nat = z || s of nat
type chn = empty || full of nat
reftype chnref = ref chn with r = empty
beh f() = read r with full(x) => stop | [_] => g()
beh g() = stop
beh h() = yield. stop
system = f(), h()
"""


class TestBehaviours:
    def machine(self):
        return Machine(load(ONE_PLACE))

    def test_stop(self):
        m = self.machine()
        th = m.threads[0]
        th.body, th.env = Stop(), {}
        assert m.step_behaviour(th) == (S, [])

    def test_yield(self):
        m = self.machine()
        th = m.threads[1]
        th.body = m.funcs["h"].body
        status, writes = m.step_behaviour(th)
        assert status == R and writes == [] and isinstance(th.body, Stop)

    def test_read_without_match_waits(self):
        m = self.machine()
        th = m.threads[0]
        status, _ = m.step_behaviour(th)
        assert status == W
        assert isinstance(th.body, Read)
        assert m.store["r"] == value("empty")


class TestScheduler:
    def machine(self, n):
        text = ("type sig = abst || prst\nreftype sigref = ref sig with r = abst\n"
                "beh w() = read r with prst => stop | [_] => w()\n"
                "system = " + ", ".join(["w()"] * n))
        m = Machine(load(text))
        for th in m.threads:
            m.step_behaviour(th)  # every thread now sits on its read
        return m

    def test_all_next_ends_the_instant(self):
        m = self.machine(3)
        for th in m.threads:
            th.status = N
        assert m.scheduler_next(start=0) is None

    def test_single_runnable_thread(self):
        m = self.machine(3)
        for th in m.threads:
            th.status = S
        m.threads[1].status = R
        assert m.scheduler_next(start=0) == 1

    def test_waiting_thread_eligible_once_pattern_matches(self):
        m = self.machine(1)
        m.threads[0].status = W
        assert m.scheduler_next(start=0) is None
        m.store["r"] = value("prst")
        assert m.scheduler_next(start=0) == 0

    def test_end_of_instant_transitions(self):
        m = self.machine(3)
        m.threads[0].status = N
        m.threads[1].status = W
        m.threads[2].status = S
        read = m.threads[1].body
        m.store["r"] = value("prst")
        assert m.end_of_instant() is False
        assert [th.status for th in m.threads] == [R, R, S]
        assert m.threads[1].body == read.default
        assert m.store == m.s0

    def test_all_stopped_terminates(self):
        m = self.machine(2)
        for th in m.threads:
            th.status = S
        assert m.end_of_instant() is True


def test_alarm_rings_at_instant_two():
    trace = run(corpus.load("alarm"), 3)
    rings = [rec.store["ring"] for rec in trace.instants]
    assert rings == [value("abst"), value("abst"), value("prst")]
    assert trace.terminated


def test_single_stop_thread_terminates_in_first_instant():
    trace = run(load("beh f() = stop\nsystem = f()\n"), 5)
    assert len(trace.instants) == 1 and trace.terminated
    assert trace.instants[0].stopped == frozenset({0})


EXP = corpus.source("exp").replace("system = exp(s(s(s(z))))", "system = exp({n})")


@pytest.mark.parametrize("k", [1, 2, 3, 5, 8])
def test_exp_register_grows_exponentially(k):
    arg = "z"
    for _ in range(k):
        arg = f"s({arg})"
    prog = load(EXP.format(n=arg))
    assert not check_read_once(analysed(prog)[0]).ok
    trace = run(prog, 1)
    assert size(trace.instants[0].store["r"]) == 2 ** k


@pytest.mark.parametrize("name", CORPUS)
def test_runs_are_deterministic(name):
    prog = corpus.load(name)
    assert run(prog, 6).render() == run(prog, 6).render()


@pytest.mark.parametrize("name", [n for n in CORPUS if n != "exp"])
def test_instants_finish_within_fuel(name):
    trace = run(corpus.load(name), 8, fuel=200_000)
    assert trace.instants


@pytest.mark.parametrize("name", CORPUS)
def test_store_starts_each_instant_at_defaults(name):
    prog = corpus.load(name)
    m = Machine(prog)
    for _ in range(5):
        assert m.store == m.s0
        m.run_instant()
        if m.end_of_instant():
            break


@pytest.mark.parametrize("name", [n for n in CORPUS if n != "exp"])
def test_each_read_runs_at_most_once_per_instant(name):
    prog = corpus.load(name)
    assert check_read_once(analysed(prog)[0]).ok
    for rec in run(prog, 8).instants:
        for ts in rec.threads:
            assert all(n <= 1 for n in ts.read_counts.values())


def test_exp_read_runs_repeatedly():
    prog = corpus.load("exp")
    counts = run(prog, 1).instants[0].threads[0].read_counts
    (label,) = [r.label for r in reads_in(prog.function("exp").body)]
    assert counts[label] == 3


def test_text_trace_format():
    text = run(corpus.load("alarm"), 3).render()
    assert "instant 2 | thread 0 | S | writes ring=prst(|v|=0)" in text
    assert "instant 2 | store sig=abst, ring=prst" in text
    assert text.endswith("terminated\n")


def test_writes_are_recorded_per_step():
    trace = run(corpus.load("monitor"), 2)
    feeder_steps = [st for st in trace.instants[0].steps if st.thread == 1]
    assert feeder_steps[0].writes == (("i", value("cons", s(Z), NIL)),)
