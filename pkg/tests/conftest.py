import numpy as np
import pytest

from autoqec.hilbert import DensityMatrix, TensorSpace


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(space: TensorSpace, rng: np.random.Generator) -> DensityMatrix:
    d = space.total_dim
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    return DensityMatrix(space, rho)
