import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from core.models import build_integrable_chain, model_from_params


@pytest.fixture(scope="session")
def mbl4():
    """Disordered chain, 4 sites (dim 6)."""
    return model_from_params("mbl", 4, W=2.0, disorder_seed=3)


@pytest.fixture(scope="session")
def integrable3():
    return build_integrable_chain(3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(dim, rng):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def decaying_qubit(gamma=1.0):
    """One site with a single lowering jump; index 1 is the excited level."""
    from core.linalg import ComplexOperator
    from core.models import LindbladModel, spin_chain_basis

    lower = ComplexOperator(np.array([[0, 1], [0, 0]], dtype=np.complex128))
    return LindbladModel(
        hamiltonian=ComplexOperator(np.zeros((2, 2)), hermitian=True),
        jumps=((lower, gamma),),
        basis=spin_chain_basis(1),
        label="decaying_qubit"
    )
