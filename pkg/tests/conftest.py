import numpy as np
import pytest
from hypothesis import settings

from mobilecontrol.cli.expr import bump
from mobilecontrol.pde_solver import SpatialGrid

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = {}


@pytest.fixture
def grid200():
    return SpatialGrid(200)


@pytest.fixture
def flagship_target(grid200):
    return 0.3 * bump(grid200.nodes, 0.55, 0.95)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


__all__ = ["ACCEPTANCE_LINES", "np"]
