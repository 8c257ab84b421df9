import numpy as np
import pytest

from op_poisson_lab.estimators import (SpeedTable, ThetaTable, VarianceTable, build_speed_table,
                                       build_theta_table, build_variance_table)
from op_poisson_lab.homog import P_C

# Finer than the library default just above p_c, where alpha and theta are steep.
FINE_GRID = (0.66, 0.67, 0.68, 0.69, 0.70, 0.72, 0.74, 0.77, 0.80, 0.85, 0.90, 0.95, 1.0)

_VERDICTS = []


def record_verdict(line):
    _VERDICTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def speed_table():
    return build_speed_table(FINE_GRID, seed=11).pinned()


@pytest.fixture(scope="session")
def theta_table():
    return build_theta_table(FINE_GRID, seed=12).pinned()


@pytest.fixture(scope="session")
def variance_table():
    return build_variance_table(FINE_GRID, seed=13).pinned()


@pytest.fixture
def linear_speed():
    """alpha(p) = (p - p_c)/(1 - p_c): cheap synthetic table for shape plumbing."""
    p = np.linspace(P_C, 1.0, 41)
    return SpeedTable(p, (p - P_C) / (1 - P_C), np.zeros_like(p), np.zeros(p.size, int),
                      np.zeros(p.size, int))


@pytest.fixture
def flat_theta():
    p = np.array([P_C, 0.7, 0.8, 0.9, 1.0])
    return ThetaTable(p, [0.0, 0.75, 0.93, 0.99, 1.0], np.zeros(5), np.zeros(5, int),
                      np.zeros(5, int))


@pytest.fixture
def flat_variance():
    p = np.array([0.66, 0.8, 0.9, 1.0])
    return VarianceTable(p, [2.5, 0.85, 0.37, 0.0], np.zeros(4), np.zeros(4, int),
                         np.zeros(4, int))
