import numpy as np
import pytest

from bosonlab.manybody import ModelSpec, benchmark_model, rank_one_pair_model, swap_matrix


def random_unit(d, rng):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_hermitian(d, rng, scale=1.0):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (X + X.conj().T) / 2


def random_model(d, rng, scale=1.0):
    """Random Hermitian h and swap-symmetric Hermitian w."""
    h = random_hermitian(d, rng, scale)
    W = random_hermitian(d * d, rng, scale)
    S = swap_matrix(d)
    W = (W + S @ W @ S) / 2
    return ModelSpec(d, h, W)


def random_projector(d, rank, rng):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, _ = np.linalg.qr(X)
    return Q[:, :rank] @ Q[:, :rank].conj().T


@pytest.fixture(scope="session")
def bench():
    """d=2, h=diag(0,1), pair coupling g=2 on mode 1."""
    return benchmark_model(2.0)


@pytest.fixture(scope="session")
def bench15():
    return benchmark_model(1.5)


@pytest.fixture(scope="session")
def tunneling_model():
    """Unique nondegenerate Hartree minimizer (real negative hopping)."""
    h = np.array([[0.0, -0.3], [-0.3, 1.0]])
    return rank_one_pair_model(2, h, 2.0)
