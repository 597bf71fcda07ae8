import numpy as np
import pytest

from aefie.geometry import sphere, two_squares, unit_square
from aefie.pipeline import Discretization, ExperimentSettings
from aefie.spaces import Mesh, SpaceKind, build_space


@pytest.fixture(scope="session")
def sphere_geo():
    return sphere()


@pytest.fixture(scope="session")
def square_geo():
    return unit_square()


@pytest.fixture(scope="session")
def two_squares_geo():
    return two_squares()


@pytest.fixture(scope="session")
def sphere_spaces(sphere_geo):
    """Form0/1/2 spaces on the sphere for (p, level) in a small grid."""
    out = {}
    for p, lvl in ((1, 0), (1, 1), (2, 1)):
        mesh = Mesh(sphere_geo, lvl)
        out[p, lvl] = {k: build_space(k, sphere_geo, p, lvl, mesh=mesh) for k in SpaceKind}
    return out


@pytest.fixture(scope="session")
def disc_sphere_p1l1(sphere_geo):
    return Discretization(sphere_geo, ExperimentSettings(degree=1, level=1))


@pytest.fixture(scope="session")
def disc_sphere_p2l1(sphere_geo):
    return Discretization(sphere_geo, ExperimentSettings(degree=2, level=1))


@pytest.fixture(scope="session")
def disc_squares(two_squares_geo):
    return Discretization(two_squares_geo, ExperimentSettings(degree=1, level=0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(acceptance_log.LINES, key=lambda k: (int(str(k).rstrip("+")), str(k))):
            terminalreporter.write_line(acceptance_log.LINES[k])
