"""Virtual machine for compiled programs.

Each thread owns a stack of frames ``(function, pc, stack)``.  The scheduler
switches threads round-robin; a waiting thread becomes eligible again once
some register has been written after it suspended.

With metering on, the machine tracks the size of every value it handles and
the configuration size: each stack slot and each register holding ``v``
counts ``|v| + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .bytecode import BytecodeProgram, Segment
from .interpreter import (
    DEFAULT_FUEL, FuelExhausted, InstantRecord, N, R, S, Step, W, instant_records, render_instant,
)
from .lang import Cons


class VmFault(RuntimeError):
    pass


@dataclass
class Frame:
    fn: str
    pc: int
    stack: list


@dataclass
class VmThread:
    frames: list
    status: object = R  # R, N, S or (W, resume pc, time)

    @property
    def label(self) -> str:
        return self.status[0] if isinstance(self.status, tuple) else self.status


@dataclass
class VmInstant(InstantRecord):
    max_config_size: int = 0
    start_size: int = 0  # largest value in the state when the instant began


@dataclass
class VmTrace:
    instants: list
    terminated: bool = False
    metered: bool = False

    def render(self) -> str:
        out = []
        for rec in self.instants:
            out.append(render_instant(rec))
            if self.metered:
                out.append(f"instant {rec.index} | max-value-size {rec.max_value_size}\n")
                out.append(f"instant {rec.index} | max-config-size {rec.max_config_size}\n")
        return "".join(out) + ("terminated\n" if self.terminated else "")

    def records(self) -> str:
        return "".join(instant_records(rec) for rec in self.instants)


def _slot(v: Cons) -> int:
    return v._size + 1


class VM:
    def __init__(self, bp: BytecodeProgram, fuel: int = DEFAULT_FUEL, meter: bool = False,
                 hook: Optional[Callable[[int, Frame, object], None]] = None):
        self.bp = bp
        self.segs: dict[str, Segment] = bp.segment_map
        self.regs = set(bp.registers)
        self.s0 = bp.initial_store()
        self.store = dict(self.s0)
        self.fuel_budget = fuel
        self.meter = meter
        self.hook = hook
        self.time = 0
        self.wtime = 0
        self.instant = 0
        self.threads = [VmThread([Frame(f, 1, list(args))]) for f, args in bp.system]
        for f, args in bp.system:
            seg = self.segs.get(f)
            if seg is None or seg.arity != len(args):
                raise VmFault(f"bad initial thread {f}/{len(args)}")
        self.config = sum(_slot(v) for th in self.threads for fr in th.frames for v in fr.stack)
        self.config += sum(_slot(v) for v in self.store.values())
        self.max_config = self.config
        self.max_value = 0

    # -- metering helpers
    def _push(self, st: list, v: Cons) -> None:
        st.append(v)
        if self.meter:
            self.config += v._size + 1
            if v._size > self.max_value:
                self.max_value = v._size

    def _pop(self, st: list) -> Cons:
        if not st:
            raise VmFault("stack underflow")
        v = st.pop()
        if self.meter:
            self.config -= v._size + 1
        return v

    def _drop_frame(self, fr: Frame) -> None:
        if self.meter:
            self.config -= sum(v._size + 1 for v in fr.stack)

    def _new_frame(self, fn: str, args: list) -> Frame:
        if self.meter:
            self.config += sum(v._size + 1 for v in args)
        return Frame(fn, 1, args)

    def _register(self, fr: Frame, operand) -> str:
        if isinstance(operand, str):
            return operand
        if not 1 <= operand <= len(fr.stack):
            raise VmFault(f"register index {operand} outside the stack")
        r = fr.stack[operand - 1]
        if r.args or r.name not in self.regs:
            raise VmFault(f"{r} is not a register")
        return r.name

    def _args(self, fr: Frame, g: str, n: int) -> list:
        seg = self.segs.get(g)
        if seg is None:
            raise VmFault(f"unknown function {g}")
        if seg.arity != n or n > len(fr.stack):
            raise VmFault(f"bad call {g}/{n}")
        return fr.stack[len(fr.stack) - n:]

    def current(self, tid: int):
        th = self.threads[tid]
        if not th.frames:
            raise VmFault(f"thread {tid} has no frame")
        fr = th.frames[-1]
        code = self.segs[fr.fn].code
        if not 1 <= fr.pc <= len(code):
            raise VmFault(f"pc {fr.pc} outside {fr.fn}")
        return fr, code[fr.pc - 1]

    def run_one(self, tid: int, writes: list) -> Optional[str]:
        """Execute one instruction of thread ``tid``; return its label or None."""
        th = self.threads[tid]
        fr, ins = self.current(tid)
        if self.hook is not None:
            self.hook(tid, fr, ins)
        op, st = ins.op, fr.stack
        if op == "load":
            if not 1 <= ins.a <= len(st):
                raise VmFault(f"load {ins.a} outside the stack")
            self._push(st, st[ins.a - 1])
            fr.pc += 1
        elif op == "branch":
            if not st:
                raise VmFault("branch on an empty stack")
            v = st[-1]
            if v.name == ins.a:
                self._pop(st)
                for a in v.args:
                    self._push(st, a)
                fr.pc += 1
            else:
                fr.pc = ins.b
        elif op == "build":
            if ins.b > len(st):
                raise VmFault("stack underflow")
            args = tuple(st[len(st) - ins.b:])
            for _ in range(ins.b):
                self._pop(st)
            self._push(st, Cons(ins.a, args))
            fr.pc += 1
        elif op == "call":
            args = list(self._args(fr, ins.a, ins.b))
            th.frames.append(self._new_frame(ins.a, args))
        elif op == "tcall":
            args = list(self._args(fr, ins.a, ins.b))
            th.frames.pop()
            self._drop_frame(fr)
            th.frames.append(self._new_frame(ins.a, args))
        elif op == "return":
            if len(th.frames) < 2:
                raise VmFault(f"return from {fr.fn} without a caller")
            v = self._pop(st)
            th.frames.pop()
            self._drop_frame(fr)
            caller = th.frames[-1]
            for _ in range(self.segs[fr.fn].arity):
                self._pop(caller.stack)
            self._push(caller.stack, v)
            caller.pc += 1
        elif op == "read":
            self._push(st, self.store[self._register(fr, ins.a)])
            fr.pc += 1
        elif op == "write":
            r = self._register(fr, ins.a)
            v = self._pop(st)
            if self.meter:
                self.config += v._size - self.store[r]._size
            self.store[r] = v
            writes.append((r, v))
            fr.pc += 1
        elif op == "stop":
            for f in th.frames:
                self._drop_frame(f)
            th.frames = []
            return S
        elif op == "yield":
            fr.pc += 1
            return R
        elif op == "next":
            fr.pc += 1
            return N
        elif op == "wait":
            self._pop(st)
            fr.pc = ins.a
            return W
        else:  # pragma: no cover - Instruction rejects unknown opcodes
            raise VmFault(f"unknown instruction {op}")
        if self.meter:
            self._track_config()
        return None

    def _track_config(self) -> None:
        if self.config > self.max_config:
            self.max_config = self.config

    def eligible(self, k: int) -> bool:
        st = self.threads[k].status
        if st == R:
            return True
        return isinstance(st, tuple) and st[2] < self.wtime

    def next_thread(self, tid: int, inclusive: bool = False) -> Optional[int]:
        n = len(self.threads)
        first = tid if inclusive else tid + 1
        for d in range(n):
            k = (first + d) % n
            if self.eligible(k):
                return k
        return None

    def _state_size(self) -> int:
        vals = [v._size for th in self.threads for fr in th.frames for v in fr.stack]
        vals += [v._size for v in self.store.values()]
        return max(vals, default=0)

    def run_instant(self) -> VmInstant:
        fuel = self.fuel_budget
        start = self._state_size()
        self.max_value = start
        self.max_config = self.config
        steps = []
        tid = self.next_thread(0, inclusive=True)
        writes: list = []
        while tid is not None:
            th = self.threads[tid]
            fr, ins = self.current(tid)
            if ins.op == "write":
                self.wtime = self.time
            elif ins.op == "wait":
                th.status = (W, fr.pc + 1, self.time)
            fuel -= 1
            if fuel < 0:
                raise FuelExhausted(f"more than {self.fuel_budget} instructions in one instant")
            x = self.run_one(tid, writes)
            if x is None:
                continue
            if x != W:
                th.status = x
            steps.append(Step(tid, x, tuple(writes)))
            writes = []
            nxt = self.next_thread(tid)
            if nxt is not None:
                self.threads[nxt].status = R
                self.time += 1
            tid = nxt
        rec = VmInstant(
            self.instant, steps, dict(self.store),
            frozenset(i for i, th in enumerate(self.threads) if th.status == S),
            self.max_value, [], self.max_config, start)
        self.end_of_instant()
        self.instant += 1
        return rec

    def end_of_instant(self) -> None:
        # statuses are reset before the next thread is picked
        if self.meter:
            self.config += sum(v._size for v in self.s0.values()) - sum(v._size for v in self.store.values())
        self.store = dict(self.s0)
        self.wtime = self.time
        for th in self.threads:
            if isinstance(th.status, tuple):
                th.frames[-1].pc = th.status[1]
            if th.status != S:
                th.status = R

    @property
    def finished(self) -> bool:
        return all(th.status == S for th in self.threads)


def run_vm(bp: BytecodeProgram, instants: int, fuel: int = DEFAULT_FUEL, meter: bool = False,
           hook=None) -> VmTrace:
    vm = VM(bp, fuel, meter, hook)
    trace = VmTrace([], metered=meter)
    for _ in range(instants):
        if vm.finished:
            trace.terminated = True
            break
        trace.instants.append(vm.run_instant())
        if vm.finished:
            trace.terminated = True
            break
    return trace


__all__ = ["Frame", "VM", "VmFault", "VmInstant", "VmThread", "VmTrace", "run_vm"]
