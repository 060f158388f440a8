import numpy as np
import pytest

from mpinv.domain import DomainConfig
from mpinv.measures import DiscreteMeasure
from mpinv.simgen import ModelSpec, generate, sample_spectrum

EX1_H = DiscreteMeasure([0.5, 1.0], [0.5, 0.5])


def wishart_eigs(scales, n, rng):
    """Eigenvalues of diag(scales) W diag(scales) / n with W ~ Wishart(n, I),
    drawn through the Bartlett decomposition (same law as B X X^T B / n)."""
    d = len(scales)
    A = np.tril(rng.standard_normal((d, d)), -1)
    A[np.diag_indices(d)] = np.sqrt(rng.chisquare(n - np.arange(d)))
    return np.linalg.eigvalsh(scales[:, None] * (A @ A.T) * scales[None, :] / n)


@pytest.fixture(scope="session")
def ex1_200():
    """Seeded Ex1 realization at d=200: (Y, H, sigma_eigs, spectrum)."""
    Y, H, sig = generate(ModelSpec("Ex1", 200, seed=1))
    return Y, H, sig, sample_spectrum(Y)


@pytest.fixture(scope="session")
def ex1_50():
    Y, H, sig = generate(ModelSpec("Ex1", 50, seed=3))
    return Y, H, sig, sample_spectrum(Y)


@pytest.fixture(scope="session")
def safe_cfg():
    return DomainConfig(tau=0.05, kappa=10.0, sigma2=1.0)
