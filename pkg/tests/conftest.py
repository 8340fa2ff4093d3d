import numpy as np
import pytest

from dmdflux.mesh import DomainSpec, build_meshes
from dmdflux.scenarios import patch_scenario
from dmdflux.solvers import CoupledProblem


@pytest.fixture(scope="session")
def spec8():
    return DomainSpec(8)


@pytest.fixture(scope="session")
def meshes8(spec8):
    return build_meshes(spec8)


@pytest.fixture(scope="session")
def patch_problem8(spec8):
    return CoupledProblem(spec8, patch_scenario(1.5e-3, 2.5e-3))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
