"""Test design and asymptotic performance of the linear statistic test.

The test statistic is T = b^T phi_bar, a weighted empirical mean of the
sufficient statistics over K snapshots.  By the CLT its per-hypothesis
law is asymptotically normal, which yields the closed-form detection
probability, the decision threshold, and the ROC quality
chi = 2 * integral of P_D over P_FA - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.special

from .array_model import ArrayConfig, build_steering, receive_covariance
from .gaussian_moments import gaussian_stat_moments, gaussian_weight_vector
from .onebit_moments import StatMoments, StatSelector, onebit_stat_moments

__all__ = [
    "ConditioningError",
    "DetectorDesign",
    "RocCurve",
    "qfunc",
    "qfunc_inv",
    "surrogate_weights",
    "design_detector",
    "design_onebit",
    "design_gaussian",
    "test_statistic",
    "asymptotic_rates",
    "roc_quality",
]

# ROC quadrature policy: Gauss-Legendre nodes over Q^{-1}(P_FA) in [-VMAX, VMAX].
ROC_VMAX = 8.0
ROC_GL_NODES = 256
ROC_SAMPLES = 512

# Ridge fallback for the moment-matrix solves.
RIDGE_BASE = 1e-10
RIDGE_DOUBLINGS = 20


class ConditioningError(RuntimeError):
    """Moment matrix too ill-conditioned even after the ridge fallback."""


def qfunc(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    return 0.5 * scipy.special.erfc(np.asarray(x) / np.sqrt(2.0))


def qfunc_inv(p):
    """Inverse of qfunc, accurate deep into the tail (relative error ~1e-14)."""
    p = np.asarray(p)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("probability must lie strictly inside (0, 1)")
    return np.sqrt(2.0) * scipy.special.erfcinv(2.0 * p)


@dataclass(frozen=True)
class DetectorDesign:
    """Weight vector plus per-hypothesis test-statistic moments.

    var0/var1 are single-snapshot variances b^T R b; the K-snapshot
    deviations are sqrt(var)/sqrt(K), so doubling K divides sigma by
    sqrt(2) with no other dependence on K.
    """

    weights: np.ndarray = field(repr=False)
    mu0: float
    mu1: float
    var0: float
    var1: float
    snapshots: int

    def __post_init__(self):
        if self.snapshots < 1:
            raise ValueError("snapshot count must be positive")
        if self.var0 < 0 or self.var1 < 0:
            raise ValueError("variances must be nonnegative")

    @property
    def sigma0(self) -> float:
        return math.sqrt(self.var0) / math.sqrt(self.snapshots)

    @property
    def sigma1(self) -> float:
        return math.sqrt(self.var1) / math.sqrt(self.snapshots)

    @property
    def degenerate(self) -> bool:
        """True when both hypotheses are indistinguishable (zero weights)."""
        return self.var0 == 0.0 and self.var1 == 0.0 and self.mu0 == self.mu1

    def with_snapshots(self, snapshots: int) -> "DetectorDesign":
        return DetectorDesign(self.weights, self.mu0, self.mu1,
                              self.var0, self.var1, snapshots)


@dataclass(frozen=True)
class RocCurve:
    """Sampled (P_FA, P_D) pairs and the scalar quality chi."""

    points: np.ndarray = field(repr=False)
    chi: float

    @property
    def chi_db(self) -> float | None:
        """10*log10(chi), or None when chi <= 0."""
        if self.chi > 0:
            return 10.0 * math.log10(self.chi)
        return None


def _solve_moment_system(cov: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Solve cov @ x = mean, retrying with a doubling ridge on failure."""
    try:
        c, low = scipy.linalg.cho_factor(cov, lower=True)
        return scipy.linalg.cho_solve((c, low), mean)
    except scipy.linalg.LinAlgError:
        pass
    n = cov.shape[0]
    ridge = RIDGE_BASE * np.trace(cov) / n
    for _ in range(RIDGE_DOUBLINGS):
        try:
            c, low = scipy.linalg.cho_factor(cov + ridge * np.eye(n), lower=True)
            return scipy.linalg.cho_solve((c, low), mean)
        except scipy.linalg.LinAlgError:
            ridge *= 2.0
    raise ConditioningError("moment matrix not factorizable even with ridge")


def surrogate_weights(m0: StatMoments, m1: StatMoments) -> np.ndarray:
    """Moment-matched weight vector R1^{-1} mu1 - R0^{-1} mu0.

    This choice maximizes the separation of the asymptotic statistic
    means under the two hypotheses; with Gaussian data it coincides with
    the exact log-likelihood-ratio weights.
    """
    if m0.mean.shape != m1.mean.shape:
        raise ValueError("moment dimensions do not match")
    return _solve_moment_system(m1.cov, m1.mean) - _solve_moment_system(m0.cov, m0.mean)


def design_detector(weights, mean0, cov0, mean1, cov1, snapshots: int) -> DetectorDesign:
    """Assemble a DetectorDesign from a weight vector and both moment sets."""
    w = np.asarray(weights, dtype=float)
    mu0 = float(w @ np.asarray(mean0))
    mu1 = float(w @ np.asarray(mean1))
    var0 = max(float(w @ np.asarray(cov0) @ w), 0.0)
    var1 = max(float(w @ np.asarray(cov1) @ w), 0.0)
    return DetectorDesign(weights=w, mu0=mu0, mu1=mu1, var0=var0, var1=var1,
                          snapshots=int(snapshots))


def design_onebit(config: ArrayConfig, gamma0: float, gamma1: float,
                  snapshots: int) -> DetectorDesign:
    """End-to-end one-bit design for amplitudes gamma0 (null) vs gamma1."""
    steering = build_steering(config)
    selector = StatSelector(config.channels)
    m0 = onebit_stat_moments(receive_covariance(steering, gamma0), selector)
    m1 = onebit_stat_moments(receive_covariance(steering, gamma1), selector)
    b = surrogate_weights(m0, m1)
    return design_detector(b, m0.mean, m0.cov, m1.mean, m1.cov, snapshots)


def design_gaussian(config: ArrayConfig, gamma0: float, gamma1: float,
                    snapshots: int) -> DetectorDesign:
    """Unquantized benchmark design (exact likelihood-ratio weights)."""
    steering = build_steering(config)
    h0 = gaussian_stat_moments(receive_covariance(steering, gamma0))
    h1 = gaussian_stat_moments(receive_covariance(steering, gamma1))
    b = gaussian_weight_vector(h0, h1)
    return design_detector(b, h0.mean_stats, h0.stat_cov,
                           h1.mean_stats, h1.stat_cov, snapshots)


def test_statistic(weights: np.ndarray, snapshots: np.ndarray,
                   selector: StatSelector) -> float:
    """Evaluate T = b^T phi_bar on a K x M matrix of +-1 snapshots."""
    z = np.asarray(snapshots, dtype=float)
    if z.ndim != 2 or z.shape[1] != selector.channels:
        raise ValueError("snapshot matrix must be K x M for the selector's M")
    if not np.all(np.abs(z) == 1.0):
        raise ValueError("snapshots must contain only +-1 entries")
    gram = (z.T @ z) / z.shape[0]
    return float(np.asarray(weights) @ gram[selector.rows, selector.cols])


def asymptotic_rates(design: DetectorDesign, pfa: float) -> tuple[float, float]:
    """Asymptotic detection probability and threshold at a false-alarm rate.

    Returns (pd, threshold) with threshold = Q^{-1}(pfa) * sigma0 + mu0
    and pd = Q(Q^{-1}(pfa) * sigma0/sigma1 - (mu1 - mu0)/sigma1).
    """
    if not 0.0 < pfa < 1.0:
        raise ValueError("false-alarm probability must lie in (0, 1)")
    if design.degenerate:
        return float(pfa), design.mu0
    v = float(qfunc_inv(pfa))
    s0, s1 = design.sigma0, design.sigma1
    xi = v * s0 + design.mu0
    if s1 == 0.0:
        return (1.0 if design.mu1 > xi else 0.0), xi
    pd = float(qfunc(v * s0 / s1 - (design.mu1 - design.mu0) / s1))
    return pd, xi


def _gl_rule(v_max: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    return v_max * x, v_max * w


def roc_quality(design: DetectorDesign, v_max: float = ROC_VMAX,
                gl_nodes: int = ROC_GL_NODES, samples: int = ROC_SAMPLES) -> RocCurve:
    """ROC curve and quality chi = 2 * ∫ P_D dP_FA - 1.

    The integral is taken in the Gaussian domain u = Q(v): the integrand
    P_D(Q(v)) * pdf(v) is analytic over v in [-v_max, v_max] and is
    integrated by Gauss-Legendre; tail truncation beyond |v| = 8 is below
    1e-15.  A `samples`-point curve on a uniform v grid is returned for
    plotting.
    """
    v_grid = np.linspace(v_max, -v_max, samples)
    if design.degenerate:
        u = qfunc(v_grid)
        return RocCurve(points=np.column_stack([u, u]), chi=0.0)
    s0, s1 = design.sigma0, design.sigma1
    dmu = design.mu1 - design.mu0

    def pd_of_v(v):
        if s1 == 0.0:
            return (v * s0 < dmu).astype(float)
        return qfunc((v * s0 - dmu) / s1)

    x, w = _gl_rule(v_max, gl_nodes)
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    chi = 2.0 * float(w @ (pd_of_v(x) * pdf)) - 1.0
    points = np.column_stack([qfunc(v_grid), pd_of_v(v_grid)])
    return RocCurve(points=points, chi=chi)
