import numpy as np
import pytest

from chdyn.assembly import Discretization
from chdyn.mesh import structured_unit_square
from chdyn.model import ModelParams
from chdyn.potentials import double_well_penalized, wetting_energy

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


@pytest.fixture(scope="session")
def double_well():
    return double_well_penalized(0.0)


@pytest.fixture(scope="session")
def wetting():
    return wetting_energy()


@pytest.fixture(scope="session")
def general_params():
    """Non-unit coefficients so that no factor silently drops out."""
    return ModelParams(m=1.3, m_gamma=0.7, sigma=1.1, delta=0.9, delta_gamma=1.2,
                       kappa=0.5, tau=1e-2)


@pytest.fixture(scope="session")
def square():
    def make(n):
        mesh = structured_unit_square(n)
        return mesh, Discretization.from_mesh(mesh)
    return make


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
