import numpy as np
import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Store a one-line pass/fail summary for the terminal report."""
    def _record(tag, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}")
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rank_r(rng, n, m, r):
    U = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    V = rng.standard_normal((m, r)) + 1j * rng.standard_normal((m, r))
    return U @ V.conj().T / 2
