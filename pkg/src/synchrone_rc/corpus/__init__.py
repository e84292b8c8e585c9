"""Example programs shipped with the package, plus generated families."""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Optional


def corpus_dir() -> Path:
    return Path(str(resources.files(__name__)))


def names() -> list[str]:
    return sorted(p.stem for p in corpus_dir().glob("*.sct"))


def path(name: str) -> Path:
    return corpus_dir() / f"{name}.sct"


def source(name: str) -> str:
    return path(name).read_text(encoding="utf-8")


def sidecar(name: str, ext: str) -> Optional[list[str]]:
    p = corpus_dir() / f"{name}.{ext}"
    return p.read_text(encoding="utf-8").splitlines() if p.exists() else None


def load(name: str):
    from ..frontend import load as load_text

    return load_text(source(name))


def tight_source(threads: int, reads: int) -> str:
    """Threads that read the register ``reads`` times, each time writing
    back twice the value read (the first write takes the larger of the value
    and the parameter).  Starting from ``s(z)`` the register ends the first
    instant at size ``2^(threads*reads)``."""
    lines = [
        "type nat = z || s of nat",
        "reftype natref = ref nat with r = z",
        "",
        "def dble(n : nat) : nat = match n with s(n') then s(s(dble(n'))) else z",
        "",
        "def max(x : nat, y : nat) : nat =",
        "    match x with s(x')",
        "    then match y with s(y') then s(max(x', y')) else s(x')",
        "    else y",
        "",
        "beh halt() = stop",
        "",
    ]
    body = f"next. f(dble(x{reads}))"
    for k in range(reads, 0, -1):
        value = "dble(max(x1, x0))" if k == 1 else f"dble(x{k})"
        body = f"read<y{k}> r with x{k} => r := {value}. {body} | [_] => halt()"
    lines.append(f"beh f(x0 : nat) = {body}")
    lines.append("")
    lines.append("system = " + ", ".join(["f(s(z))"] * threads))
    return "\n".join(lines) + "\n"


def tight_qi(reads: int) -> list[str]:
    args = ", ".join(f"2*x{i}" for i in range(1, reads + 2))
    return [
        "qi dble = 2*x1",
        "qi max = max(x1, x2)",
        f"qi f^ = max({args})",
        "qi halt^ = 0",
    ]


__all__ = ["corpus_dir", "load", "names", "path", "sidecar", "source", "tight_qi", "tight_source"]
