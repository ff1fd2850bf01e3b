import numpy as np
import pytest

from opinionsim.dynamics import ExpertAssignment
from opinionsim.graph import PSTAR, generate_counterexample

N_STAR = 20000


@pytest.fixture(scope="session")
def pstar_regular():
    return generate_counterexample(PSTAR, N_STAR, mode="regular")


@pytest.fixture(scope="session")
def pstar_random():
    return generate_counterexample(PSTAR, N_STAR, mode="random", seed=20211201)


@pytest.fixture(scope="session")
def io_assignment(pstar_regular):
    b = pstar_regular.blocks
    return ExpertAssignment(np.arange(*b["I"]), np.arange(*b["O"]))


def perturbed_io(graph, moves, rng):
    """Start from E1 = I, E0 = O and relocate ``moves`` random experts to
    random non-experts elsewhere."""
    e1 = np.arange(*graph.blocks["I"])
    e0 = np.arange(*graph.blocks["O"])
    taken = np.zeros(graph.n, bool)
    taken[e1] = taken[e0] = True
    for _ in range(moves):
        target = int(rng.choice(np.flatnonzero(~taken)))
        if rng.random() < 0.5:
            i = rng.integers(e1.size)
            taken[e1[i]] = False
            e1[i] = target
        else:
            i = rng.integers(e0.size)
            taken[e0[i]] = False
            e0[i] = target
        taken[target] = True
    return ExpertAssignment(e1, e0)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert."""
    def record(number: int, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print("\n" + line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
