import numpy as np
import pytest

from ifshadow.ifs_core import CircleAffine, FiniteMap, IFSystem, IntervalClamp, ShiftMap
from ifshadow.spaces import BinaryShift, Circle, FiniteTable, Interval


def doubling_family():
    return IFSystem(Circle(), (CircleAffine(2, 0.0), CircleAffine(2, 1 / 3)))


def shift_system(W=4, extension="periodic"):
    return IFSystem(BinaryShift(W, extension), (ShiftMap(False), ShiftMap(True)))


def path_table(n):
    return FiniteTable(tuple(tuple(float(abs(i - j)) for j in range(n)) for i in range(n)))


@pytest.fixture
def doubling():
    return doubling_family()


@pytest.fixture
def single_doubling():
    return IFSystem(Circle(), (CircleAffine(2, 0.0),))


@pytest.fixture
def shift4():
    return shift_system(4)


@pytest.fixture
def clamp():
    return IFSystem(Interval(), (IntervalClamp(),))


@pytest.fixture
def identity_table():
    return IFSystem(path_table(5), (FiniteMap(tuple(range(5))),))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
