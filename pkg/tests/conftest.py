import numpy as np
import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    """Record one line per acceptance criterion; printed in the terminal summary."""
    def record(line):
        _ACCEPTANCE.append(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def paper_x():
    return np.diag([10.0, 20.0, 20.0, 20.0, 20.0]).astype(complex)


@pytest.fixture
def paper_y():
    return np.diag([1.0, 2.0, 3.0, 4.0, 5.0]).astype(complex)


@pytest.fixture
def sx():
    return np.array([[0, 1], [1, 0]], dtype=complex)


@pytest.fixture
def sz():
    return np.array([[1, 0], [0, -1]], dtype=complex)
