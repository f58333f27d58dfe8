import pytest

from consensus_ed.market import ConsumerParams, DgParams
from consensus_ed.scenario import Scenario, builtin_case1

_ACCEPTANCE_LINES = []


def record_criterion(number, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {name} -- {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture
def acceptance():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def case1():
    return builtin_case1()


@pytest.fixture
def single_pair():
    """One DG (alpha=1, beta=0) feeding one consumer (omega=10, b=1); optimum lam=5, p=2.5."""
    return Scenario(
        dgs=[DgParams("g", alpha=1.0, beta=0.0, p_max=1e6)],
        consumers=[ConsumerParams("c", omega=10.0, b=1.0, attached_dg="g")],
    )
