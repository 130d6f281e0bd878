import numpy as np
import pytest


def random_correlation(rng: np.random.Generator, dim: int, factors: int | None = None) -> np.ndarray:
    """Random PSD correlation matrix from a Gaussian factor model."""
    w = rng.standard_normal((dim, factors or dim + 3))
    c = w @ w.T
    d = np.sqrt(np.diag(c))
    c = c / np.outer(d, d)
    np.fill_diagonal(c, 1.0)
    return c


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
