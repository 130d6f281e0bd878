import numpy as np
import pytest

from onebitdet import (
    ArrayConfig,
    SimConfig,
    StatSelector,
    build_steering,
    onebit_stat_moments,
    quantize,
    receive_covariance,
    sample_snapshots,
    trial_generator,
)
from onebitdet.detector import (
    asymptotic_rates,
    design_onebit,
    test_statistic as evaluate_statistic,
)
from onebitdet.montecarlo import (
    _chunk_statistics,
    empirical_rates,
    empirical_stat_moments,
    simulate_statistics,
    wilson_interval,
)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(trials=0, snapshots=10, seed=1, gamma=0.0)
    with pytest.raises(ValueError):
        SimConfig(trials=10, snapshots=0, seed=1, gamma=0.0)
    with pytest.raises(ValueError):
        SimConfig(trials=10, snapshots=10, seed=-1, gamma=0.0)


def test_quantize_conventions():
    y = np.array([[0.0, -0.3, 2.0, -0.0]])
    assert quantize(y).tolist() == [[1.0, -1.0, 1.0, 1.0]]
    # invariant under positive per-element scaling
    w = np.random.default_rng(0).standard_normal((50, 4))
    scale = np.random.default_rng(1).uniform(0.1, 10.0, size=(50, 4))
    assert np.array_equal(quantize(w), quantize(scale * w))


def test_sample_snapshots_deterministic():
    cov = receive_covariance(build_steering(ArrayConfig(3, 0.4)), 0.7)
    a = sample_snapshots(cov, 100, trial_generator(11, 5))
    b = sample_snapshots(cov, 100, trial_generator(11, 5))
    c = sample_snapshots(cov, 100, trial_generator(11, 6))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_snapshots_identity_covariance():
    cov = receive_covariance(build_steering(ArrayConfig(2, 0.3)), 0.0)
    y = sample_snapshots(cov, 1_000_000, trial_generator(3, 0))
    sample = y.T @ y / y.shape[0]
    se = np.sqrt((np.eye(4) + 1.0) / y.shape[0])  # R_ii R_jj + R_ij^2 over n
    assert np.all(np.abs(sample - np.eye(4)) <= 3 * se)


def test_sample_snapshots_broadside_duplicates():
    cov = receive_covariance(build_steering(ArrayConfig(2, 0.0)), 1.0)
    y = sample_snapshots(cov, 500_000, trial_generator(3, 1))
    corr = np.corrcoef(y[:, 0], y[:, 1])[0, 1]
    assert corr == pytest.approx(0.5, abs=3 * 1.0 / np.sqrt(y.shape[0]))


def test_chunk_statistics_matches_public_path():
    import scipy.linalg

    cfg = ArrayConfig(3, np.deg2rad(25.0))
    cov = receive_covariance(build_steering(cfg), 0.6)
    sel = StatSelector(6)
    w = np.arange(1.0, len(sel) + 1) / 10.0
    chol = scipy.linalg.cholesky(cov.matrix, lower=True)
    fast = _chunk_statistics(chol, w, sel.rows, sel.cols, 64, 17, 0, 40)
    slow = np.array([
        evaluate_statistic(w, quantize(sample_snapshots(cov, 64, trial_generator(17, k))), sel)
        for k in range(40)
    ])
    assert np.array_equal(fast, slow)


def test_simulate_statistics_thread_invariance():
    cfg = ArrayConfig(4, np.deg2rad(15.0))
    cov = receive_covariance(build_steering(cfg), 0.4)
    sel = StatSelector(8)
    w = np.linspace(-1.0, 1.0, len(sel))
    serial = simulate_statistics(cov, w, sel, 5000, 32, seed=9, threads=1)
    pooled = simulate_statistics(cov, w, sel, 5000, 32, seed=9, threads=3)
    assert np.array_equal(serial, pooled)


def test_wilson_interval_basics():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 100)[0] == 0.0
    assert wilson_interval(100, 100)[1] == 1.0


def test_empirical_rates_extreme_threshold():
    cfg = ArrayConfig(2, 0.1)
    design = design_onebit(cfg, 0.0, 0.5, 16)
    sim0 = SimConfig(trials=200, snapshots=16, seed=5, gamma=0.0)
    sim1 = SimConfig(trials=200, snapshots=16, seed=6, gamma=0.5)
    out0, out1 = empirical_rates(cfg, design, sim0, sim1, threshold=-np.inf)
    assert out0.decisions == 1.0
    assert out1.decisions == 1.0
    assert out0.wilson_interval[1] == 1.0


def test_empirical_false_alarm_calibration():
    # threshold from the asymptotic rate at pfa = 1e-2 must reproduce the
    # false-alarm rate within [0.008, 0.012] over 1e5 trials (K = 100, S = 8).
    cfg = ArrayConfig(8, np.deg2rad(15.0))
    design = design_onebit(cfg, 0.0, 10.0 ** (-10.0 / 20.0), 100)
    _, xi = asymptotic_rates(design, 1e-2)
    cov0 = receive_covariance(build_steering(cfg), 0.0)
    sel = StatSelector(16)
    stats = simulate_statistics(cov0, design.weights, sel, 100_000, 100,
                                seed=2026, threads=4)
    pfa_hat = float(np.mean(stats > xi))
    assert 0.008 <= pfa_hat <= 0.012


def test_statistic_mean_matches_half_under_null_median_threshold():
    # with the threshold at mu0, the exceedance rate under H0 is 1/2.
    cfg = ArrayConfig(3, np.deg2rad(40.0))
    design = design_onebit(cfg, 0.0, 0.4, 25)
    cov0 = receive_covariance(build_steering(cfg), 0.0)
    sel = StatSelector(6)
    stats = simulate_statistics(cov0, design.weights, sel, 20_000, 25, seed=1)
    rate = float(np.mean(stats > design.mu0))
    assert rate == pytest.approx(0.5, abs=3 * 0.5 / np.sqrt(20_000))


def test_empirical_moments_match_analytic():
    cov = receive_covariance(build_steering(ArrayConfig(2, np.deg2rad(35.0))), 0.7)
    sel = StatSelector(4)
    analytic = onebit_stat_moments(cov, sel)
    mean, cov_hat, se_mean, se_cov = empirical_stat_moments(cov, sel, 2_000_000, seed=42)
    assert np.all(np.abs(mean - analytic.mean) <= 3 * se_mean + 1e-12)
    assert np.all(np.abs(cov_hat - analytic.cov) <= 3 * se_cov + 1e-12)
