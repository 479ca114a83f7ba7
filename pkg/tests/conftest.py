import math
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from solwalk import lattice as lat
from solwalk import step_measure as sm

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

GOLDEN_T = ((2, 1), (1, 1))
GENERATORS = [(0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1), (1, 0, 0), (-1, 0, 0)]

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def golden():
    return lat.make_lattice(GOLDEN_T)


@pytest.fixture(scope="session")
def base_measure(golden):
    return lat.LatticeMeasure(golden, {lat.LatticeElement(*g): Fraction(1, 6) for g in GENERATORS})


@pytest.fixture(scope="session")
def solomyak():
    return sm.make_solomyak(math.log(2), 0.7)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
