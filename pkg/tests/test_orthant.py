import itertools

import numpy as np
import pytest

from onebitdet import orthant
from onebitdet.orthant import (
    orthant_bivariate,
    orthant_quadrivariate,
    sign_pattern_probability,
)
from conftest import random_correlation


def trivariate_closed_form(r12, r13, r23):
    return 0.125 + (np.arcsin(r12) + np.arcsin(r13) + np.arcsin(r23)) / (4 * np.pi)


def corr4(offdiag):
    m = np.eye(4)
    iu, ju = np.triu_indices(4, k=1)
    m[iu, ju] = offdiag
    m[ju, iu] = offdiag
    return m


def test_bivariate_closed_form_values():
    assert orthant_bivariate(0.0) == 0.25
    assert orthant_bivariate(0.5) == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert orthant_bivariate(1.0) == pytest.approx(0.5, abs=1e-15)
    assert orthant_bivariate(-1.0) == pytest.approx(0.0, abs=1e-15)


def test_bivariate_clamps_roundoff_but_rejects_garbage():
    assert orthant_bivariate(1.0 + 5e-10) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        orthant_bivariate(1.1)


def test_quadrivariate_identity_is_exact():
    assert abs(orthant_quadrivariate(np.eye(4)) - 0.0625) <= 1e-10


def test_quadrivariate_equicorrelated_half():
    # rho = 1/2 makes the components (z0 + z_i)/sqrt(2) for iid z's, so the
    # orthant event is "z0 is the maximum of five iid variables": exactly 1/5.
    r = corr4(np.full(6, 0.5))
    assert orthant_quadrivariate(r) == pytest.approx(0.2, abs=1e-9)


def test_quadrivariate_perfect_correlation_limit():
    val = orthant_quadrivariate(corr4(np.full(6, 1.0)))
    assert val == pytest.approx(0.5, abs=1e-3)
    assert orthant.perturbation_count() > 0


def test_quadrivariate_negative_equicorrelated_boundary():
    # At rho = -1/3 the four components sum to zero a.s.; orthant mass is 0.
    val = orthant_quadrivariate(corr4(np.full(6, -1.0 / 3.0)))
    assert val == pytest.approx(0.0, abs=1e-6)


def test_quadrivariate_block_diagonal_reduces_to_trivariate(rng):
    for _ in range(10):
        c3 = random_correlation(rng, 3)
        m = np.eye(4)
        m[:3, :3] = c3
        expected = 0.5 * trivariate_closed_form(c3[0, 1], c3[0, 2], c3[1, 2])
        assert orthant_quadrivariate(m) == pytest.approx(expected, abs=1e-8)


def test_quadrivariate_monte_carlo_oracle():
    # Plain Monte Carlo with 1e8 samples; equicorrelated rho = 0.5 sampled
    # through the common-factor construction x_i = (z0 + z_i)/sqrt(2).
    r = corr4(np.full(6, 0.5))
    analytic = orthant_quadrivariate(r)
    rng = np.random.default_rng(99)
    n = 100_000_000
    batch = 2_000_000
    hits = 0
    for _ in range(n // batch):
        z0 = rng.standard_normal((batch, 1))
        z = rng.standard_normal((batch, 4))
        hits += int(np.count_nonzero(np.all(z0 + z > 0.0, axis=1)))
    phat = hits / n
    se = np.sqrt(phat * (1 - phat) / n)
    assert abs(analytic - phat) <= 3 * se


def test_monotone_in_single_offdiagonal():
    # Slepian: raising one correlation cannot lower the orthant probability.
    base = np.full(6, 0.2)
    for slot in range(6):
        lo, hi = base.copy(), base.copy()
        lo[slot], hi[slot] = 0.1, 0.4
        assert orthant_quadrivariate(corr4(hi)) >= orthant_quadrivariate(corr4(lo)) - 1e-10


def test_rejects_non_psd():
    bad = corr4(np.array([0.9, -0.9, 0.9, 0.9, -0.9, 0.9]))
    with pytest.raises(ValueError):
        orthant_quadrivariate(bad)
    with pytest.raises(ValueError):
        orthant_quadrivariate(np.eye(3))


def test_sign_pattern_identity_uniform():
    for signs in itertools.product((-1.0, 1.0), repeat=4):
        p = sign_pattern_probability(np.eye(4), np.array(signs))
        assert p == pytest.approx(0.0625, abs=1e-10)


def test_sign_pattern_bivariate_flip():
    c = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert sign_pattern_probability(c, [1.0, -1.0]) == pytest.approx(1.0 / 6.0, abs=1e-15)
    assert sign_pattern_probability(c, [1.0, 1.0]) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_sign_patterns_sum_to_one(rng):
    for _ in range(20):
        c = random_correlation(rng, 4)
        total = sum(sign_pattern_probability(c, np.array(s))
                    for s in itertools.product((-1.0, 1.0), repeat=4))
        assert total == pytest.approx(1.0, abs=1e-7)


def test_cache_and_determinism(rng):
    c = random_correlation(rng, 4)
    first = orthant_quadrivariate(c)
    cached = orthant_quadrivariate(c)
    orthant.clear_cache()
    fresh = orthant_quadrivariate(c)
    assert first == cached == fresh
    assert orthant.cache_size() >= 1
