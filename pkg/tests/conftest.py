import pytest

from factories import lv2d, lv4d
from splitlv import State


@pytest.fixture
def p2():
    return lv2d()


@pytest.fixture
def p4():
    return lv4d()


@pytest.fixture
def z2():
    return State([1.0], [7.0])


@pytest.fixture
def z4():
    return State([1.1, 5.2], [3.0, 7.1])


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""

    def record(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
