import numpy as np
import pytest

from nvmech.model import SystemParams, coupling_constants


@pytest.fixture(scope="session")
def reference_params():
    return SystemParams.reference(n_centers=2, fock_dim=8)


@pytest.fixture(scope="session")
def reference_layout(reference_params):
    return reference_params.layout()


@pytest.fixture(scope="session")
def j_nuclear(reference_params):
    return coupling_constants(reference_params).uniform_j_nuclear()


@pytest.fixture(scope="session")
def gate_time(j_nuclear):
    return np.pi / (4.0 * j_nuclear)


def random_state(rng, dim):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_hermitian(rng, dim):
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (m + m.conj().T) / 2
