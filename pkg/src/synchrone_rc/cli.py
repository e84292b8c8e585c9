"""Command-line entry point.

Exit codes: 0 success, 1 diagnostics, 2 read-once failure, 3 I/O error,
4 termination or quasi-interpretation failure, 5 fuel exhausted, 6 VM fault,
7 bytecode verification failure (structure, flow or shape).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from .frontend import DiagnosticError, parse_with_diagnostics, typecheck
from .frontend.diagnostics import ERROR, Diagnostic
from .interpreter import DEFAULT_FUEL, FuelExhausted

OK, DIAG, READ_ONCE, IO, ANALYSIS, FUEL, FAULT, SHAPE = range(8)


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def _out(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _err(text: str) -> None:
    sys.stderr.write(text if text.endswith("\n") else text + "\n")


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _err(f"{path}: {exc.strerror or exc}")
        raise _Exit(IO)


def _report(diags, path: str, fmt: str) -> None:
    for d in diags:
        _err(d.to_json(path) if fmt == "json" else d.render(path))


def load_program(path: str, fmt: str = "text"):
    """Parse and typecheck, printing diagnostics; exits with 1 on errors."""
    text = _read(path)
    prog, diags = parse_with_diagnostics(text)
    if prog is None:
        _report(diags, path, fmt)
        raise _Exit(DIAG)
    try:
        typed = typecheck(prog)
    except DiagnosticError as exc:
        _report(diags + exc.diagnostics, path, fmt)
        raise _Exit(DIAG)
    _report(diags, path, fmt)
    return typed


def _sidecar(path: str, ext: str, override: Optional[str]) -> Optional[list]:
    if override:
        return _read(override).splitlines()
    p = Path(path).with_suffix("." + ext)
    return p.read_text(encoding="utf-8").splitlines() if p.exists() else None


def _read_once(prog, bypass: bool):
    from .cfa import build_call_graph, check_read_once

    cg = build_call_graph(prog)
    rep = check_read_once(cg)
    _out(rep.render() + (" (bypassed)" if bypass and not rep.ok else ""))
    if not rep.ok and not bypass:
        raise _Exit(READ_ONCE)
    return cg


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args) -> int:
    from .cfa import build_call_graph, check_read_once

    code = OK
    for path in args.files:
        try:
            prog = load_program(path, args.diag_format)
        except _Exit as e:
            code = max(code, e.code)
            continue
        rep = check_read_once(build_call_graph(prog))
        _out(f"{path}: {rep.render()}")
        if not rep.ok:
            code = max(code, READ_ONCE)
    return code


def cmd_run(args) -> int:
    from .interpreter import run

    prog = load_program(args.file, args.diag_format)
    if not args.no_read_once:
        from .cfa import build_call_graph, check_read_once

        rep = check_read_once(build_call_graph(prog))
        if not rep.ok:
            _err(rep.render())
            return READ_ONCE
    try:
        trace = run(prog, args.instants, args.fuel)
    except FuelExhausted as exc:
        _err(f"fuel exhausted: {exc}")
        return FUEL
    _out(trace.records() if args.format == "records" else trace.render())
    return OK


def _precedence(path: str, prog, cs, override: Optional[str]):
    from .termination import BoundExceeded, parse_precedence, search_precedence

    behaviours = [f.name for f in prog.functions if f.behaviour]
    lines = list(prog.orders) or _sidecar(path, "prec", override)
    if lines:
        return parse_precedence(lines, behaviours), "given"
    try:
        return search_precedence(cs), "searched"
    except BoundExceeded as exc:
        _out(f"termination: fail, {exc} (write it to {Path(path).with_suffix('.prec').name})")
        raise _Exit(ANALYSIS)


def cmd_analyze(args) -> int:
    from .compiler import compile_program
    from .control_points import program_control_points, constraints
    from .quasi import (
        Assignment, BudgetExceeded, check_assignment, parse_assignment, size_bound, space_bound,
        synthesize,
    )
    from .shape import analyse
    from .termination import check_termination

    prog = load_program(args.file, args.diag_format)
    cg = _read_once(prog, args.no_read_once)
    cps = program_control_points(prog, cg)
    cs = constraints(cps, cg)
    _out("control points:")
    for cp in cps:
        _out(f"  {cp}")
    _out("constraints:")
    for c in cs:
        _out(f"  {c}")
    code = OK
    prec, how = _precedence(args.file, prog, cs, args.prec)
    if prec is None:
        _out("termination: fail, no precedence found by search; give one in a .prec file")
        code = ANALYSIS
    else:
        tv = check_termination(cs, prec)
        _out(tv.render() + ("" if how == "given" else " (searched)"))
        if not tv.ok:
            code = ANALYSIS
    behaviours = [f.name for f in prog.functions if f.behaviour]
    hats = [f.name + "^" for f in prog.functions if f.behaviour]
    lines = list(prog.qis) or _sidecar(args.file, "qi", args.qi)
    base = Assignment.for_program(prog, cg)
    if lines:
        q = base.with_entries(parse_assignment(lines, behaviours))
    else:
        try:
            q = synthesize(cs, base, extra=hats)
        except BudgetExceeded as exc:
            _out(f"quasi-interpretation: fail, {exc}; give one in a .qi file")
            return ANALYSIS
    qr = check_assignment(q, cs, extra=hats, seed=args.seed)
    _out(qr.render())
    _out("assignment:")
    _out("".join("  " + line for line in q.render().splitlines(True)) or "  (constructors only)")
    if not qr.ok:
        return ANALYSIS
    _out(size_bound(prog, q).render())
    if code == OK:
        stack = analyse(compile_program(prog)).max_height
        sb = space_bound(prog, q, stack)
        c = size_bound(prog, q).c
        _out(f"{sb.render()}; at c = {c}: {sb.evaluate(c)}")
    return code


def cmd_compile(args) -> int:
    from .compiler import compile_program

    prog = load_program(args.file, args.diag_format)
    text = compile_program(prog).render()
    out = args.output or str(Path(args.file).with_suffix(".sbc"))
    if out == "-":
        _out(text)
        return OK
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        _err(f"{out}: {exc.strerror or exc}")
        return IO
    _out(f"wrote {out}")
    return OK


def _bytecode(path: str, fmt: str):
    from .bytecode import BytecodeError, parse_bytecode
    from .compiler import compile_program

    if path.endswith(".sct"):
        prog = load_program(path, fmt)
        return compile_program(prog), prog
    try:
        return parse_bytecode(_read(path)), None
    except BytecodeError as exc:
        d = Diagnostic(ERROR, 1, 1, str(exc), "bytecode")
        _report([d], path, fmt)
        raise _Exit(DIAG)


def cmd_exec(args) -> int:
    from .vm import VmFault, run_vm

    bp, _ = _bytecode(args.file, args.diag_format)
    try:
        trace = run_vm(bp, args.instants, args.fuel, meter=args.meter)
    except FuelExhausted as exc:
        _err(f"fuel exhausted: {exc}")
        return FUEL
    except VmFault as exc:
        _err(f"vm fault: {exc}")
        return FAULT
    _out(trace.records() if args.format == "records" else trace.render())
    return OK


def cmd_verify(args) -> int:
    from .quasi import parse_assignment
    from .shape import verify
    from .termination import parse_precedence

    bp, prog = _bytecode(args.file, args.diag_format)
    behaviours = [s.name for s in bp.segments if s.behaviour]
    orders = list(prog.orders) if prog is not None else []
    qis = list(prog.qis) if prog is not None else []
    lines = orders or _sidecar(args.file, "prec", args.prec)
    prec = parse_precedence(lines, behaviours) if lines else None
    lines = qis or _sidecar(args.file, "qi", args.qi)
    entries = parse_assignment(lines, behaviours) if lines else None
    rep = verify(bp, prec, entries, read_once=not args.no_read_once)
    if rep.shape is not None:
        for name, seg in rep.shape.segments.items():
            _out(f"segment {name}")
            _out(seg.render())
            for c in seg.constraints:
                _out(f"  {c}")
    _out(rep.render())
    bad = rep.first_failure
    if bad is None:
        return OK
    return SHAPE if bad.name in ("structure", "flow", "shape") else ANALYSIS


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="synchrone-rc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--diag-format", choices=("text", "json"), default="text")

    sp = sub.add_parser("check", help="parse, typecheck and check read-once")
    sp.add_argument("files", nargs="+")
    common(sp)
    sp.set_defaults(fn=cmd_check)

    for name, fn, help_ in (("run", cmd_run, "run the reference interpreter"),
                            ("exec", cmd_exec, "run bytecode on the virtual machine")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("file")
        sp.add_argument("--instants", type=int, default=10)
        sp.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
        sp.add_argument("--format", choices=("text", "records"), default="text")
        common(sp)
        if name == "run":
            sp.add_argument("--no-read-once", action="store_true")
        else:
            sp.add_argument("--meter", action="store_true")
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("analyze", help="control points, termination, quasi-interpretation, bounds")
    sp.add_argument("file")
    sp.add_argument("--prec")
    sp.add_argument("--qi")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--no-read-once", action="store_true")
    common(sp)
    sp.set_defaults(fn=cmd_analyze)

    sp = sub.add_parser("compile", help="write text bytecode")
    sp.add_argument("file")
    sp.add_argument("-o", "--output")
    common(sp)
    sp.set_defaults(fn=cmd_compile)

    sp = sub.add_parser("verify", help="verify bytecode (.sbc, or .sct compiled first)")
    sp.add_argument("file")
    sp.add_argument("--prec")
    sp.add_argument("--qi")
    sp.add_argument("--no-read-once", action="store_true")
    common(sp)
    sp.set_defaults(fn=cmd_verify)
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _Exit as e:
        return e.code


if __name__ == "__main__":
    sys.exit(main())
