"""Moments of the one-bit sufficient statistics.

With z = sign(y) for zero-mean Gaussian y, the chosen statistics are the
off-diagonal products z_i z_j (one per unordered channel pair; diagonal
products are constant 1 and would make the covariance singular).  Second
moments of z follow the arcsine law; fourth moments reduce by index
coincidences to either constants, arcsine terms, or quadrivariate
orthant probabilities.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .array_model import ReceiveCovariance, correlation_normalize
from .orthant import _orthant_batch, orthant_bivariate, sign_pattern_probability

__all__ = [
    "StatSelector",
    "StatMoments",
    "arcsine_covariance",
    "sign_fourth_moment",
    "onebit_stat_moments",
    "exact_binary_pmf",
]

# Warn when min eig of the statistic covariance drops below this times trace.
CONDITION_WARN = 1e-10


class StatSelector:
    """Ordered map between channel pairs (i < j) and statistic positions.

    Pairs are enumerated lexicographically: (0,1), (0,2), ..., (M-2,M-1).
    """

    def __init__(self, channels: int):
        if channels < 2:
            raise ValueError("need at least two channels")
        self.channels = int(channels)
        self.rows, self.cols = np.triu_indices(channels, k=1)
        self.pairs = list(zip(self.rows.tolist(), self.cols.tolist()))
        self._position = {pair: p for p, pair in enumerate(self.pairs)}

    def __len__(self) -> int:
        return len(self.pairs)

    def position(self, i: int, j: int) -> int:
        """Statistic index of the unordered off-diagonal pair {i, j}."""
        if i == j:
            raise ValueError("diagonal pairs carry no statistic")
        return self._position[(i, j) if i < j else (j, i)]

    def pair(self, p: int) -> tuple[int, int]:
        return self.pairs[p]


@dataclass(frozen=True)
class StatMoments:
    """Mean vector and covariance matrix of the pair statistics."""

    mean: np.ndarray = field(repr=False)
    cov: np.ndarray = field(repr=False)
    source_gamma: float
    cov_min_eigenvalue: float | None = None


def arcsine_covariance(cov) -> np.ndarray:
    """Covariance of the sign vector: (2/pi) * arcsin of the correlation."""
    sigma = correlation_normalize(cov)
    return (2.0 / np.pi) * np.arcsin(np.clip(sigma, -1.0, 1.0))


def sign_fourth_moment(corr: np.ndarray, i: int, j: int, k: int, l: int) -> float:
    """E[z_i z_j z_k z_l] for the sign vector of a Gaussian with correlation corr.

    Coincidence cases: identical pairs give 1; one shared index leaves a
    plain pair moment; four distinct indices expand the all-positive
    orthant indicator into 16*P4 - 1 - sum of the six pair moments (odd
    sign moments vanish by symmetry).
    """
    corr = np.asarray(corr, dtype=float)
    m = corr.shape[0]
    if not (0 <= i < j < m and 0 <= k < l < m):
        raise ValueError("need i < j and k < l within the matrix dimension")
    if (i, j) == (k, l):
        return 1.0
    shared = {i, j} & {k, l}
    if len(shared) == 1:
        p, q = sorted({i, j, k, l} - shared)
        return 4.0 * orthant_bivariate(corr[p, q]) - 1.0
    idx = np.array(sorted((i, j, k, l)))
    sub = corr[np.ix_(idx, idx)]
    p4 = _orthant_batch(_offdiag6(sub[None, :, :]))[0]
    pair_sum = (2.0 / np.pi) * np.sum(np.arcsin(np.clip(sub[np.triu_indices(4, k=1)], -1, 1)))
    return float(16.0 * p4 - 1.0 - pair_sum)


def _offdiag6(mats: np.ndarray) -> np.ndarray:
    """Off-diagonals of (B, 4, 4) matrices in (0,1),(0,2),...,(2,3) order."""
    iu, ju = np.triu_indices(4, k=1)
    return mats[:, iu, ju]


def onebit_stat_moments(cov: ReceiveCovariance, selector: StatSelector | None = None) -> StatMoments:
    """Mean and covariance of the pair statistics under one hypothesis.

    The covariance cell for pairs p=(i,j), q=(k,l) is
    E[z_i z_j z_k z_l] - mean[p] * mean[q]; the fourth moments are
    assembled vectorized, with quadrivariate orthant evaluations
    deduplicated per sorted four-index correlation signature.
    """
    if selector is None:
        selector = StatSelector(cov.channels)
    if selector.channels != cov.channels:
        raise ValueError("selector dimension does not match the covariance")
    sigma = correlation_normalize(cov)
    np.fill_diagonal(sigma, 1.0)
    r_z = (2.0 / np.pi) * np.arcsin(np.clip(sigma, -1.0, 1.0))
    iu, ju = selector.rows, selector.cols
    mean = r_z[iu, ju]

    n_stats = len(selector)
    pp, qq = np.triu_indices(n_stats, k=0)
    i, j = iu[pp], ju[pp]
    k, l = iu[qq], ju[qq]
    m_ik, m_il, m_jk, m_jl = i == k, i == l, j == k, j == l
    shared = (
        m_ik.astype(np.int8) + m_il.astype(np.int8)
        + m_jk.astype(np.int8) + m_jl.astype(np.int8)
    )
    fourth = np.empty(pp.shape[0])

    same = shared == 2
    fourth[same] = 1.0

    one = shared == 1
    if np.any(one):
        rem_r = np.select([m_ik, m_il, m_jk, m_jl], [j, j, i, i])
        rem_s = np.select([m_ik, m_il, m_jk, m_jl], [l, k, l, k])
        fourth[one] = r_z[rem_r[one], rem_s[one]]

    distinct = shared == 0
    if np.any(distinct):
        quads = np.sort(np.stack([i, j, k, l], axis=1)[distinct], axis=1)
        subsets, inverse = np.unique(quads, axis=0, return_inverse=True)
        sub_iu, sub_ju = np.triu_indices(4, k=1)
        rho6 = sigma[subsets[:, sub_iu], subsets[:, sub_ju]]
        p4 = _orthant_batch(rho6)
        pair_sum = (2.0 / np.pi) * np.arcsin(np.clip(rho6, -1.0, 1.0)).sum(axis=1)
        m4 = 16.0 * p4 - 1.0 - pair_sum
        fourth[distinct] = m4[inverse]

    cov_mat = np.empty((n_stats, n_stats))
    cov_mat[pp, qq] = fourth - mean[pp] * mean[qq]
    cov_mat[qq, pp] = cov_mat[pp, qq]

    eigmin = float(np.linalg.eigvalsh(cov_mat)[0])
    trace = float(np.trace(cov_mat))
    if eigmin < CONDITION_WARN * trace:
        warnings.warn(
            f"statistic covariance nearly singular (min eig {eigmin:.3e}, trace {trace:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return StatMoments(mean=mean, cov=cov_mat, source_gamma=cov.gamma,
                       cov_min_eigenvalue=eigmin)


def exact_binary_pmf(cov: ReceiveCovariance) -> tuple[np.ndarray, np.ndarray]:
    """Exact probability table of the quantized vector for M <= 4 channels.

    Returns (patterns, probs): all 2^M sign patterns enumerated with -1
    before +1 in the last channel fastest, and their probabilities, each
    an orthant probability of the sign-adjusted correlation matrix.
    Larger M is rejected: the required orthant probabilities have no
    tractable evaluation beyond dimension four.
    """
    m = cov.channels
    if m > 4:
        raise ValueError("exact pmf is only available for M <= 4 channels")
    if m not in (2, 4):
        raise ValueError("exact pmf supports 2 or 4 channels")
    sigma = correlation_normalize(cov)
    grid = np.stack(np.meshgrid(*[[-1.0, 1.0]] * m, indexing="ij"), axis=-1)
    patterns = grid.reshape(-1, m)
    probs = np.array([sign_pattern_probability(sigma, s) for s in patterns])
    return patterns, probs
