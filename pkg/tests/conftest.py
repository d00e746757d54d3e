import numpy as np
import pytest

from rbcmech import protocols
from rbcmech.geometry import build_icosphere
from rbcmech.membrane import MembraneParams

# Posterior mode of the calibrated model; used as the reference parameter set.
MAP_PARAMS = dict(v=0.96, mu=4.60, kappa_b=1.46, b2=1.69, eta_m=0.66)


@pytest.fixture(scope="session")
def map_params():
    return MembraneParams(**MAP_PARAMS)


@pytest.fixture(scope="session")
def sphere_l2():
    return build_icosphere(2, 3.28)


@pytest.fixture(scope="session")
def sphere_l4():
    return build_icosphere(4, 3.28)


@pytest.fixture(scope="session")
def perturbed_l2(sphere_l2):
    rng = np.random.default_rng(17)
    mesh = sphere_l2.copy()
    mesh.vertices = mesh.vertices + 0.02 * rng.standard_normal(mesh.vertices.shape)
    return mesh


@pytest.fixture(scope="session")
def equilibrium_l2(map_params):
    """Equilibrated discocyte at mesh level 2 (shared across tests)."""
    return protocols.equilibrate(map_params, mesh_level=2)


@pytest.fixture(scope="session")
def stretched_l2(map_params, equilibrium_l2):
    return protocols.stretch(map_params, 120.0, base=equilibrium_l2, mesh_level=2)
