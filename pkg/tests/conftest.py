import numpy as np
import pytest

from clicklab.position import PositionBiasCurve


@pytest.fixture
def curve():
    return PositionBiasCurve(0.5, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
