import pytest

from helpers import CORPUS
from synchrone_rc import corpus
from synchrone_rc.bytecode import BytecodeProgram, Instruction, Segment, parse_bytecode
from synchrone_rc.compiler import compile_program
from synchrone_rc.frontend import load
from synchrone_rc.interpreter import FuelExhausted, N, R, S, W, run
from synchrone_rc.lang import value
from synchrone_rc.vm import VM, Frame, VmFault, run_vm

TYPES = load("type nat = z || s of nat\ntype sig = abst || prst\n"
             "reftype sigref = ref sig with r = abst\n").types
Z = value("z")


def vm_with(code, stack=(), arity=0):
    seg = Segment("f", arity, ("nat",) * arity, "beh", tuple(code))
    bp = BytecodeProgram(TYPES, (seg,), (("f", tuple(stack)),))
    return VM(bp)


class TestInstructions:
    def test_load(self):
        vm = vm_with([Instruction("load", 2), Instruction("stop")], [Z, value("s", Z), Z], 3)
        assert vm.run_one(0, []) is None
        fr = vm.threads[0].frames[-1]
        assert fr.stack[-1] == value("s", Z) and fr.pc == 2

    def test_build(self):
        vm = vm_with([Instruction("build", "s", 1), Instruction("stop")], [Z], 1)
        vm.run_one(0, [])
        assert vm.threads[0].frames[-1].stack == [value("s", Z)]

    def test_wait(self):
        vm = vm_with([Instruction("read", "r"), Instruction("wait", 1), Instruction("stop")])
        vm.run_one(0, [])
        assert vm.run_one(0, []) == W
        fr = vm.threads[0].frames[-1]
        assert fr.stack == [] and fr.pc == 1

    def test_labels(self):
        vm = vm_with([Instruction("read", "r"), Instruction("yield"), Instruction("next"), Instruction("stop")])
        assert [vm.run_one(0, []) for _ in range(4)] == [None, R, N, S]

    def test_branch(self):
        vm = vm_with([Instruction("branch", "s", 3), Instruction("stop"), Instruction("stop")],
                     [value("s", Z)], 1)
        vm.run_one(0, [])
        fr = vm.threads[0].frames[-1]
        assert fr.stack == [Z] and fr.pc == 2
        vm = vm_with([Instruction("branch", "s", 3), Instruction("stop"), Instruction("stop")], [Z], 1)
        vm.run_one(0, [])
        fr = vm.threads[0].frames[-1]
        assert fr.stack == [Z] and fr.pc == 3

    def test_write(self):
        vm = vm_with([Instruction("build", "prst", 0), Instruction("write", "r"), Instruction("stop")])
        writes = []
        vm.run_one(0, writes)
        vm.run_one(0, writes)
        assert vm.store["r"] == value("prst") and writes == [("r", value("prst"))]

    def test_bad_load_faults(self):
        vm = vm_with([Instruction("load", 3), Instruction("stop")])
        with pytest.raises(VmFault):
            vm.run_one(0, [])


class TestScheduler:
    def test_single_stop(self):
        vm = vm_with([Instruction("stop")])
        rec = vm.run_instant()
        assert [(st.thread, st.status) for st in rec.steps] == [(0, S)]
        assert vm.finished

    def test_waiting_thread_resumed_after_a_write(self):
        text = """
type sig = abst || prst
reftype sigref = ref sig with r = abst
beh writer() = yield. r := prst. stop
beh waiter() = read r with prst => stop | [_] => waiter()
system = writer(), waiter()
"""
        vm = VM(compile_program(load(text)))
        rec = vm.run_instant()
        # thread 0 yields at time 0, thread 1 waits at time 1, thread 0
        # writes at time 2 so wtime = 2 > 1 and thread 1 runs again
        assert [(st.thread, st.status) for st in rec.steps] == [(0, R), (1, W), (0, S), (1, S)]
        assert rec.stopped == frozenset({0, 1})

    def test_wait_without_write_ends_the_instant(self):
        text = """
type sig = abst || prst
reftype sigref = ref sig with r = abst
beh waiter() = read r with prst => stop | [_] => waiter()
system = waiter()
"""
        trace = run_vm(compile_program(load(text)), 3)
        assert [[st.status for st in rec.steps] for rec in trace.instants] == [[W], [W], [W]]

    @pytest.mark.parametrize("name", CORPUS)
    def test_picked_threads_meet_the_conditions(self, name):
        class Checked(VM):
            def next_thread(self, tid, inclusive=False):
                k = super().next_thread(tid, inclusive)
                if k is not None:
                    st = self.threads[k].status
                    assert st == R or (isinstance(st, tuple) and st[0] == W and st[2] < self.wtime)
                    assert self.time >= self.wtime >= 0
                return k

        vm = Checked(compile_program(corpus.load(name)))
        for _ in range(5):
            vm.run_instant()
            if vm.finished:
                break

    def test_fuel(self):
        text = """
type nat = z || s of nat
def loop(x : nat) : nat = loop(x)
reftype natref = ref nat with r = z
beh f() = r := loop(z). stop
system = f()
"""
        with pytest.raises(FuelExhausted):
            run_vm(compile_program(load(text)), 1, fuel=5000)


def test_alarm_matches_interpreter():
    prog = corpus.load("alarm")
    a = run(prog, 3)
    b = run_vm(compile_program(prog), 3)
    assert [r.store for r in b.instants] == [r.store for r in a.instants]
    assert b.instants[2].store["ring"] == value("prst")
    assert b.terminated


@pytest.mark.parametrize("name", CORPUS)
def test_differential(name):
    prog = corpus.load(name)
    a = run(prog, 5)
    b = run_vm(compile_program(prog), 5)
    assert [(r.store, r.stopped) for r in b.instants] == [(r.store, r.stopped) for r in a.instants]


def test_hand_written_bytecode_round_trips_and_runs():
    text = compile_program(corpus.load("alarm")).render()
    trace = run_vm(parse_bytecode(text), 3)
    assert trace.instants[2].store["ring"] == value("prst")


def test_meter_reports_sizes():
    trace = run_vm(compile_program(corpus.load("monitor")), 3, meter=True)
    for rec in trace.instants:
        assert rec.max_config_size > 0 and rec.max_value_size >= 0
    assert "max-config-size" in trace.render()


def test_config_meter_matches_recount():
    # the incremental meter agrees with a full recount after every instruction
    bp = compile_program(corpus.load("readers_writers"))

    def recount(vm):
        total = sum(v._size + 1 for th in vm.threads for fr in th.frames for v in fr.stack)
        return total + sum(v._size + 1 for v in vm.store.values())

    seen = []

    class Audited(VM):
        def run_one(self, tid, writes):
            out = super().run_one(tid, writes)
            seen.append((self.config, recount(self)))
            return out

    vm = Audited(bp, meter=True)
    for _ in range(4):
        vm.run_instant()
    assert seen and all(a == b for a, b in seen)
    assert isinstance(vm.threads[0].frames[-1], Frame)
