"""Exponential-family moments of the unquantized Gaussian model.

The high-resolution benchmark keeps the full statistic vec(y y^T); its
natural parameter is -1/2 vec(R^{-1}) and the statistic covariance
follows from Isserlis' theorem.  vec() is the row-major flatten; the
matrices involved are symmetric, so the stacking order is immaterial.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .array_model import ReceiveCovariance

__all__ = ["GaussianStats", "gaussian_stat_moments", "gaussian_weight_vector"]


@dataclass(frozen=True)
class GaussianStats:
    """Natural parameter, statistic mean, and statistic covariance."""

    natural_param: np.ndarray = field(repr=False)
    mean_stats: np.ndarray = field(repr=False)
    stat_cov: np.ndarray = field(repr=False)
    channels: int = 0


def gaussian_stat_moments(cov: ReceiveCovariance) -> GaussianStats:
    """Moments of vec(y y^T) for zero-mean Gaussian y with covariance R.

    Isserlis gives cov(y_i y_j, y_k y_l) = R_ik R_jl + R_il R_jk.  The
    inverse is taken through a Cholesky factorization, which raises if R
    is not positive definite (a model bug, not a recoverable state).
    """
    r = np.asarray(cov.matrix, dtype=float)
    m = r.shape[0]
    c, low = scipy.linalg.cho_factor(r, lower=True)
    r_inv = scipy.linalg.cho_solve((c, low), np.eye(m))
    r_inv = 0.5 * (r_inv + r_inv.T)
    kron = np.kron(r, r)
    # Column permutation swapping the flattened index (k,l) -> (l,k).
    perm = np.arange(m * m).reshape(m, m).T.ravel()
    stat_cov = kron + kron[:, perm]
    return GaussianStats(
        natural_param=-0.5 * r_inv.ravel(),
        mean_stats=r.ravel(),
        stat_cov=stat_cov,
        channels=m,
    )


def gaussian_weight_vector(h0: GaussianStats, h1: GaussianStats) -> np.ndarray:
    """Difference of natural parameters: the exact log-likelihood-ratio weight."""
    if h0.natural_param.shape != h1.natural_param.shape:
        raise ValueError("hypotheses have mismatched statistic dimensions")
    return h1.natural_param - h0.natural_param
