import numpy as np
import pytest

from dnls.damping import DampingProfile
from dnls.grid import Field, Grid
from dnls.solver import InitialDataSpec, ReportOptions, SimConfig


def make_config(**kw) -> SimConfig:
    """Small 1D cubic focusing run unless overridden."""
    base = dict(
        dim=1,
        p=3.0,
        mu=-1,
        points=256,
        half_length=32.0,
        damping=DampingProfile.constant(0.3),
        t_end=0.5,
        dt=1e-3,
        cadence=0.05,
        initial=InitialDataSpec(amplitude=1.0, width=2.0),
        reports=ReportOptions(figures=False),
    )
    base.update(kw)
    return SimConfig(**base)


@pytest.fixture
def cfg():
    return make_config()


@pytest.fixture
def grid1d():
    return Grid(1, 1024, 32.0)


@pytest.fixture
def gaussian1d(grid1d):
    (x,) = grid1d.coords
    return Field(grid1d, np.exp(-x**2 / 2) + 0j)


@pytest.fixture
def soliton1d(grid1d):
    (x,) = grid1d.coords
    return Field(grid1d, np.sqrt(2.0) / np.cosh(x) + 0j)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
