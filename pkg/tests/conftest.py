import math

import pytest
from hypothesis import HealthCheck, settings

from vanhove import Dispersion, GaussianBump, ShellIndicator, SourceModel, TestFunction

settings.register_profile("vanhove", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("vanhove")

# PASS/FAIL lines recorded by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def shell12():
    return TestFunction.single(ShellIndicator(1.0, 2.0))


@pytest.fixture
def bump1():
    return TestFunction.single(GaussianBump(1.0))


@pytest.fixture
def point_source_12():
    return SourceModel.unit_point(1.0, 2.0)


@pytest.fixture
def disp3():
    return Dispersion()


def unit_pair(distance=1.0, strengths=(1.0, 1.0)):
    return SourceModel.cluster([(strengths[0], (0.0, 0.0, 0.0)),
                                (strengths[1], (distance, 0.0, 0.0))])


def equilateral(side):
    h = side * math.sqrt(3) / 2
    return SourceModel.cluster([(1.0, (0.0, 0.0, 0.0)), (1.0, (side, 0.0, 0.0)),
                                (1.0, (side / 2, h, 0.0))])
