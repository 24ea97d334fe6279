import numpy as np
import pytest

from sparsebench import Dictionary, Lagrangian, SparseProblem


def random_dictionary(rng, d, n):
    x = rng.standard_normal((d, n))
    x /= np.linalg.norm(x, axis=0)
    return Dictionary(x, normalized=True)


def random_lagrangian_problem(seed, d=10, n=20, lam_scale=0.1):
    """The cross-solver benchmark instance family: lam = scale * ||X^T y||_inf."""
    rng = np.random.default_rng(seed)
    dictionary = random_dictionary(rng, d, n)
    y = rng.standard_normal(d)
    lam = lam_scale * float(np.max(np.abs(dictionary.atoms.T @ y)))
    return SparseProblem(dictionary, y, Lagrangian(lam))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
