import pytest

from helpers import ACCEPTANCE, CORPUS
from synchrone_rc import corpus
from synchrone_rc.compiler import compile_program


@pytest.fixture(scope="session")
def programs():
    return {name: corpus.load(name) for name in CORPUS}


@pytest.fixture(scope="session")
def compiled(programs):
    return {name: compile_program(p) for name, p in programs.items()}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
