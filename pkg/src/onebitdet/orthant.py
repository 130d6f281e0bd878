"""Orthant probabilities of standardized Gaussian vectors.

The bivariate case has the classical closed form 1/4 + arcsin(rho)/(2*pi).
The quadrivariate case is reduced, via Plackett's identity along the
interpolation path R(t) = (1-t)*I + t*R, to a single one-dimensional
integral whose integrand involves only bivariate conditional orthants
(again arcsine closed forms).  The integral is evaluated with a
deterministic adaptive Gauss-Kronrod scheme, vectorized over batches of
correlation matrices so large moment assemblies stay cheap.

Results are memoized on the off-diagonal entries snapped to a fixed
1e-12 grid.  Inputs are snapped *before* integrating, so a cache hit and
a fresh evaluation return bit-identical values no matter in which order
requests arrive.
"""

from __future__ import annotations

import threading

import numpy as np

__all__ = [
    "QuadratureError",
    "orthant_bivariate",
    "orthant_quadrivariate",
    "sign_pattern_probability",
    "clear_cache",
    "cache_size",
    "perturbation_count",
    "reset_perturbation_count",
]

# Numerical policy (recorded in run manifests by the CLI layer).
ABS_TOL = 1e-9            # absolute quadrature tolerance per call
EVAL_CAP = 1_000_000      # hard cap on integrand evaluations per call
CLAMP_TOL = 1e-9          # |rho| in (1, 1+CLAMP_TOL] is clamped to +-1
PSD_TOL = 1e-10           # matrices with min eigenvalue < -PSD_TOL are rejected
NEAR_SINGULAR_EIG = 1e-8  # below this, off-diagonals are shrunk toward zero
PERTURB_SHRINK = 1e-8     # relative shrink applied in the near-singular case
KEY_GRID = 1e-12          # quantization grid for the memoization key
_MIN_WIDTH = 1e-13        # refuse to bisect below this interval width


class QuadratureError(RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance."""


# 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1]
# (classic QUADPACK dqk15 abscissae and weights).
_XGK = np.array([
    -0.9914553711208126, -0.9491079123427585, -0.8648644233597691,
    -0.7415311855993944, -0.5860872354676911, -0.4058451513773972,
    -0.2077849550078985, 0.0,
    0.2077849550078985, 0.4058451513773972, 0.5860872354676911,
    0.7415311855993944, 0.8648644233597691, 0.9491079123427585,
    0.9914553711208126,
])
_WGK = np.array([
    0.02293532201052922, 0.06309209262997855, 0.10479001032225018,
    0.14065325971552592, 0.16900472663926790, 0.19035057806478540,
    0.20443294007529889, 0.20948214108472783,
    0.20443294007529889, 0.19035057806478540, 0.16900472663926790,
    0.14065325971552592, 0.10479001032225018, 0.06309209262997855,
    0.02293532201052922,
])
_WG = np.array([
    0.12948496616886969, 0.27970539148927664, 0.38183005050511894,
    0.41795918367346939, 0.38183005050511894, 0.27970539148927664,
    0.12948496616886969,
])

# Off-diagonal order of a 4x4 correlation matrix:
# slots 0..5 = (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
_PAIR_SLOTS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
# For each slot (i,j): complementary pair slot (k,l) and the four cross
# slots (k,i),(k,j),(l,i),(l,j) needed by the conditional covariance.
_PLACKETT_TABLE = (
    (0, 5, 1, 3, 2, 4),
    (1, 4, 0, 3, 2, 5),
    (2, 3, 0, 4, 1, 5),
    (3, 2, 0, 1, 4, 5),
    (4, 1, 0, 2, 3, 5),
    (5, 0, 1, 2, 3, 4),
)

_cache: dict[tuple[int, ...], float] = {}
_cache_lock = threading.Lock()
_perturbations = 0


def clear_cache() -> None:
    global _perturbations
    with _cache_lock:
        _cache.clear()


def cache_size() -> int:
    with _cache_lock:
        return len(_cache)


def perturbation_count() -> int:
    """Number of near-singular inputs that were shrunk toward identity."""
    return _perturbations


def reset_perturbation_count() -> None:
    global _perturbations
    with _cache_lock:
        _perturbations = 0


def orthant_bivariate(rho: float) -> float:
    """P(X1 > 0, X2 > 0) for standardized jointly Gaussian (X1, X2).

    Closed form 1/4 + arcsin(rho)/(2*pi).  Values of |rho| up to
    1 + CLAMP_TOL are clamped to +-1; anything larger is rejected.
    """
    rho = _clamp_rho(float(rho))
    return 0.25 + np.arcsin(rho) / (2.0 * np.pi)


def orthant_quadrivariate(corr: np.ndarray) -> float:
    """P(all four components > 0) for a standardized Gaussian vector.

    Args:
        corr: 4x4 symmetric correlation matrix (unit diagonal, PSD up to
            -PSD_TOL eigenvalue round-off).

    Returns:
        The orthant probability, absolute accuracy well inside 1e-8.

    Raises:
        ValueError: malformed or non-PSD input.
        QuadratureError: tolerance not reached within the evaluation cap.
    """
    offdiag = _validate_corr4(corr)
    return float(_orthant_batch(offdiag[None, :])[0])


def sign_pattern_probability(corr: np.ndarray, signs) -> float:
    """P(s_i * X_i > 0 for all i) for a standardized Gaussian vector.

    Flipping X_i -> s_i X_i maps pattern probabilities onto plain orthant
    probabilities of the sign-adjusted correlation matrix.  Supported
    dimensions are 2 and 4.
    """
    corr = np.asarray(corr, dtype=float)
    signs = np.asarray(signs, dtype=float)
    dim = corr.shape[0]
    if corr.shape != (dim, dim) or dim not in (2, 4):
        raise ValueError("correlation matrix must be 2x2 or 4x4")
    if signs.shape != (dim,) or not np.all(np.abs(signs) == 1.0):
        raise ValueError("signs must be a vector of +-1 matching the dimension")
    flipped = corr * np.outer(signs, signs)
    if dim == 2:
        return orthant_bivariate(flipped[0, 1])
    return orthant_quadrivariate(flipped)


def _clamp_rho(rho: float) -> float:
    if abs(rho) > 1.0 + CLAMP_TOL:
        raise ValueError(f"correlation {rho!r} outside [-1, 1] beyond clamp tolerance")
    return min(1.0, max(-1.0, rho))


def _validate_corr4(corr: np.ndarray) -> np.ndarray:
    """Check shape/symmetry/diagonal/PSD and return the 6 off-diagonals."""
    corr = np.asarray(corr, dtype=float)
    if corr.shape != (4, 4):
        raise ValueError("expected a 4x4 correlation matrix")
    if not np.allclose(corr, corr.T, atol=1e-10):
        raise ValueError("correlation matrix must be symmetric")
    if np.max(np.abs(np.diag(corr) - 1.0)) > 1e-10:
        raise ValueError("correlation matrix must have unit diagonal")
    offdiag = np.array([corr[i, j] for i, j in _PAIR_SLOTS])
    if np.any(np.abs(offdiag) > 1.0 + CLAMP_TOL):
        raise ValueError("off-diagonal entry outside [-1, 1] beyond clamp tolerance")
    return np.clip(offdiag, -1.0, 1.0)


def _prepare_offdiags(offdiags: np.ndarray) -> np.ndarray:
    """Apply the near-singular shrink policy and snap to the key grid.

    Shrinking all off-diagonals by (1 - PERTURB_SHRINK) is one step along
    the path toward the identity, which lifts a zero eigenvalue to at
    least PERTURB_SHRINK while leaving well-separated spectra untouched.
    """
    global _perturbations
    offdiags = np.clip(offdiags, -1.0, 1.0)
    mats = np.empty(offdiags.shape[:1] + (4, 4))
    mats[:] = np.eye(4)
    for slot, (i, j) in enumerate(_PAIR_SLOTS):
        mats[:, i, j] = offdiags[:, slot]
        mats[:, j, i] = offdiags[:, slot]
    eigmin = np.linalg.eigvalsh(mats)[:, 0]
    if np.any(eigmin < -PSD_TOL):
        bad = float(eigmin.min())
        raise ValueError(f"correlation matrix not PSD (min eigenvalue {bad:.3e})")
    nearly_singular = eigmin < NEAR_SINGULAR_EIG
    if np.any(nearly_singular):
        with _cache_lock:
            _perturbations += int(np.count_nonzero(nearly_singular))
        offdiags = offdiags.copy()
        offdiags[nearly_singular] *= 1.0 - PERTURB_SHRINK
    # Snap to the memoization grid first so the computed value is a pure
    # function of the cache key (evaluation order cannot matter).
    return np.round(offdiags / KEY_GRID) * KEY_GRID


def _orthant_batch(offdiags: np.ndarray) -> np.ndarray:
    """Quadrivariate orthant probabilities for a batch of signatures.

    Args:
        offdiags: array (B, 6) of off-diagonal entries in _PAIR_SLOTS order.
    """
    offdiags = _prepare_offdiags(offdiags)
    keys = np.round(offdiags / KEY_GRID).astype(np.int64)
    out = np.empty(offdiags.shape[0])
    misses: list[int] = []
    with _cache_lock:
        for n in range(offdiags.shape[0]):
            hit = _cache.get(tuple(keys[n]))
            if hit is None:
                misses.append(n)
            else:
                out[n] = hit
    if misses:
        # Deduplicate within the batch; order is deterministic (np.unique sorts).
        miss_keys, inverse = np.unique(keys[misses], axis=0, return_inverse=True)
        values = 0.0625 + _integrate_batch(miss_keys * KEY_GRID)
        with _cache_lock:
            for row, val in zip(miss_keys, values):
                _cache[tuple(row)] = float(val)
        out[np.asarray(misses)] = values[inverse]
    return out


def _integrand(theta: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Plackett derivative along R(t) = (1-t) I + t R, taken at t = sin(theta).

    Each off-diagonal contributes
    rho_ij * phi2(0, 0; t rho_ij) * P(X_k > 0, X_l > 0 | X_i = X_j = 0),
    where the conditional bivariate orthant is an arcsine closed form.
    The sine substitution cancels the 1/sqrt(1 - t^2 rho^2) endpoint
    singularity of near-degenerate matrices (|rho| close to 1).

    Args:
        theta: integration points in [0, pi/2], shape (R, N).
        rho: matching off-diagonal signatures, shape (R, 6).
    """
    t = np.sin(theta)
    jac = np.cos(theta)
    # 1 - t without cancellation (theta can sit within 1e-5 of pi/2 when
    # near-singular matrices force deep refinement there).
    om_t = 2.0 * np.sin(0.25 * np.pi - 0.5 * theta) ** 2
    t2 = t * t
    total = np.zeros_like(t)
    for ij, kl, ki, kj, li, lj in _PLACKETT_TABLE:
        p_ij = rho[:, ij][:, None]
        p_ki = rho[:, ki][:, None]
        p_kj = rho[:, kj][:, None]
        p_li = rho[:, li][:, None]
        p_lj = rho[:, lj][:, None]
        p_kl = rho[:, kl][:, None]
        # 1 - t*rho_ij and d = 1 - (t rho_ij)^2, grouped so the small
        # one-minus factors are formed from accurately known terms.
        om_ij = om_t + t * (1.0 - p_ij)
        d = np.maximum(om_ij * (2.0 - om_ij), 1e-300)
        rij = t * p_ij
        # Conditional variances: numerator (t dki)^2 + 2 t^2 pki pkj (1 - t pij)
        # avoids the O(1) cancellation of the expanded quadratic form.
        n_kk = t2 * ((p_ki - p_kj) ** 2 + 2.0 * p_ki * p_kj * om_ij)
        n_ll = t2 * ((p_li - p_lj) ** 2 + 2.0 * p_li * p_lj * om_ij)
        ckk = 1.0 - n_kk / d
        cll = 1.0 - n_ll / d
        # Conditional cross term: inner residuals (p_li - p_ij p_lj) etc. are
        # differences of exact inputs plus an om_t-scaled correction.
        inner_li = (p_li - p_ij * p_lj) + om_t * p_ij * p_lj
        inner_lj = (p_lj - p_ij * p_li) + om_t * p_ij * p_li
        ckl = t * p_kl - t2 * (p_ki * inner_li + p_kj * inner_lj) / d
        denom = np.sqrt(np.maximum(ckk * cll, 1e-300))
        rc = np.clip(ckl / denom, -1.0, 1.0)
        cond = 0.25 + np.arcsin(rc) / (2.0 * np.pi)
        total += p_ij * jac * cond / (2.0 * np.pi * np.sqrt(d))
    return total


def _integrate_batch(rho: np.ndarray) -> np.ndarray:
    """Integrate the Plackett integrand over theta in [0, pi/2] per signature.

    Adaptive bisection with the (G7, K15) pair; an interval is accepted
    when |K15 - G7| <= ABS_TOL * width / (pi/2), so per-signature accepted
    error sums to at most ABS_TOL.  Interval contributions are summed in
    left-to-right order for run-to-run determinism.
    """
    n_sig = rho.shape[0]
    sig = np.arange(n_sig)
    lo = np.zeros(n_sig)
    hi = np.full(n_sig, 0.5 * np.pi)
    evals = np.zeros(n_sig, dtype=np.int64)
    acc_sig: list[np.ndarray] = []
    acc_lo: list[np.ndarray] = []
    acc_val: list[np.ndarray] = []
    while sig.size:
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        theta = mid[:, None] + half[:, None] * _XGK[None, :]
        f = _integrand(theta, rho[sig])
        k15 = (f @ _WGK) * half
        g7 = (f[:, 1::2] @ _WG) * half
        err = np.abs(k15 - g7)
        evals_round = np.zeros(n_sig, dtype=np.int64)
        np.add.at(evals_round, sig, 15)
        evals += evals_round
        ok = err <= ABS_TOL * (hi - lo) / (0.5 * np.pi)
        if np.any(ok):
            acc_sig.append(sig[ok])
            acc_lo.append(lo[ok])
            acc_val.append(k15[ok])
        bad = ~ok
        if not np.any(bad):
            break
        if np.any(evals[sig[bad]] >= EVAL_CAP):
            raise QuadratureError(
                f"orthant quadrature exceeded {EVAL_CAP} evaluations for a signature"
            )
        if np.any(half[bad] < _MIN_WIDTH):
            raise QuadratureError("orthant quadrature interval underflow")
        sig = np.concatenate([sig[bad], sig[bad]])
        lo = np.concatenate([lo[bad], mid[bad]])
        hi = np.concatenate([mid[bad], hi[bad]])
    all_sig = np.concatenate(acc_sig)
    all_lo = np.concatenate(acc_lo)
    all_val = np.concatenate(acc_val)
    order = np.lexsort((all_lo, all_sig))
    all_sig = all_sig[order]
    all_val = all_val[order]
    starts = np.flatnonzero(np.r_[True, np.diff(all_sig) != 0])
    totals = np.add.reduceat(all_val, starts)
    result = np.empty(n_sig)
    result[all_sig[starts]] = totals
    return result
