"""Seedable Monte Carlo validation of the asymptotic detection rates.

Randomness policy: trial k draws from the Philox4x64 stream with key
(seed, 0) and the 256-bit counter started at block k * 2^192 (trial
index in the top counter word), with normal variates produced by numpy's
Generator.standard_normal (ziggurat).  A trial consumes a few thousand
counter steps, so blocks never collide, and trial values never depend on
batching, scheduling, or worker count -- which is what makes the
empirical results bit-reproducible under any parallelism.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .array_model import ArrayConfig, ReceiveCovariance, build_steering, receive_covariance
from .detector import DetectorDesign
from .onebit_moments import StatSelector

__all__ = [
    "RNG_ALGORITHM",
    "SimConfig",
    "TrialOutcome",
    "trial_generator",
    "sample_snapshots",
    "quantize",
    "simulate_statistics",
    "empirical_rates",
    "empirical_stat_moments",
    "wilson_interval",
]

# Recorded in run manifests; bump if the drawing scheme ever changes.
RNG_ALGORITHM = "philox4x64(key=[seed,0], counter=[0,0,0,trial]) + numpy ziggurat normals"

_WILSON_Z = 1.959963984540054  # two-sided 95%
_CHUNK = 2048  # trials per worker task; values do not depend on this


@dataclass(frozen=True)
class SimConfig:
    """One simulation arm: trial count, snapshots per trial, seed, source gamma."""

    trials: int
    snapshots: int
    seed: int
    gamma: float

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.snapshots < 1:
            raise ValueError("snapshots must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class TrialOutcome:
    """Per-trial statistics, exceedance fraction, and a Wilson 95% interval."""

    statistics: np.ndarray = field(repr=False)
    decisions: float
    wilson_interval: tuple[float, float]


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Independent substream for one trial: counter block `trial` of stream `seed`."""
    bitgen = np.random.Philox(counter=np.array([0, 0, 0, trial], dtype=np.uint64),
                              key=np.array([seed, 0], dtype=np.uint64))
    return np.random.Generator(bitgen)


def sample_snapshots(cov: ReceiveCovariance, count: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Draw `count` zero-mean Gaussian snapshots with the given covariance.

    Uses the lower Cholesky factor of the covariance applied to standard
    normal draws; output is (count, M) and deterministic given the
    generator state.
    """
    chol = scipy.linalg.cholesky(cov.matrix, lower=True)
    return rng.standard_normal((count, cov.channels)) @ chol.T


def quantize(snapshots: np.ndarray) -> np.ndarray:
    """Hard-limit to +-1; zero maps to +1."""
    y = np.asarray(snapshots)
    return np.where(y >= 0, 1.0, -1.0)


def _chunk_statistics(chol: np.ndarray, weights: np.ndarray, rows: np.ndarray,
                      cols: np.ndarray, snapshots: int, seed: int,
                      start: int, stop: int) -> np.ndarray:
    """Test statistics for trials [start, stop) -- top level for pickling.

    Reuses one Philox object, resetting its state to each trial's counter
    block; the streams are bit-identical to trial_generator's but the
    reset is much cheaper than reconstructing the generator.
    """
    out = np.empty(stop - start)
    m = chol.shape[0]
    key = np.array([seed, 0], dtype=np.uint64)
    bitgen = np.random.Philox(key=key)
    rng = np.random.Generator(bitgen)
    buffer = np.zeros(4, dtype=np.uint64)
    for trial in range(start, stop):
        bitgen.state = {
            "bit_generator": "Philox",
            "state": {"counter": np.array([0, 0, 0, trial], dtype=np.uint64),
                      "key": key},
            "buffer": buffer, "buffer_pos": 4, "has_uint32": 0, "uinteger": 0,
        }
        y = rng.standard_normal((snapshots, m)) @ chol.T
        z = np.where(y >= 0, 1.0, -1.0)
        gram = (z.T @ z) / snapshots
        out[trial - start] = weights @ gram[rows, cols]
    return out


def simulate_statistics(cov: ReceiveCovariance, weights: np.ndarray,
                        selector: StatSelector, trials: int, snapshots: int,
                        seed: int, threads: int = 1) -> np.ndarray:
    """Per-trial test statistics T = b^T phi_bar over independent trials.

    Trials are split into fixed chunks; with threads > 1 the chunks run
    in a process pool and are reassembled in trial order.  Results are
    identical for any `threads` value.
    """
    chol = scipy.linalg.cholesky(cov.matrix, lower=True)
    w = np.asarray(weights, dtype=float)
    ranges = [(s, min(s + _CHUNK, trials)) for s in range(0, trials, _CHUNK)]
    if threads <= 1 or len(ranges) == 1:
        parts = [_chunk_statistics(chol, w, selector.rows, selector.cols,
                                   snapshots, seed, a, b) for a, b in ranges]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_chunk_statistics, chol, w, selector.rows,
                                   selector.cols, snapshots, seed, a, b)
                       for a, b in ranges]
            parts = [f.result() for f in futures]
    return np.concatenate(parts)


def wilson_interval(successes: int, n: int, z: float = _WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("need at least one trial")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    # the bounds are exactly 0/1 at empty/full counts; don't let sqrt
    # round-off leak a spurious epsilon inside
    lo = 0.0 if successes == 0 else max(center - half, 0.0)
    hi = 1.0 if successes == n else min(center + half, 1.0)
    return (float(lo), float(hi))


def _run_arm(config: ArrayConfig, design: DetectorDesign, sim: SimConfig,
             threshold: float, threads: int) -> TrialOutcome:
    cov = receive_covariance(build_steering(config), sim.gamma)
    selector = StatSelector(config.channels)
    stats = simulate_statistics(cov, design.weights, selector, sim.trials,
                                sim.snapshots, sim.seed, threads=threads)
    exceed = int(np.count_nonzero(stats > threshold))
    return TrialOutcome(statistics=stats, decisions=exceed / sim.trials,
                        wilson_interval=wilson_interval(exceed, sim.trials))


def empirical_rates(config: ArrayConfig, design: DetectorDesign, sim0: SimConfig,
                    sim1: SimConfig, threshold: float,
                    threads: int = 1) -> tuple[TrialOutcome, TrialOutcome]:
    """Empirical (false-alarm, detection) outcomes at a fixed threshold.

    sim0 generates data under the null amplitude, sim1 under the
    alternative; both reuse the detector design unchanged.
    """
    out0 = _run_arm(config, design, sim0, threshold, threads)
    out1 = _run_arm(config, design, sim1, threshold, threads)
    return out0, out1


def empirical_stat_moments(cov: ReceiveCovariance, selector: StatSelector,
                           n_snapshots: int, seed: int,
                           batch: int = 1 << 17):
    """Empirical mean/covariance of the pair statistics of quantized snapshots.

    Draws n_snapshots sign vectors in fixed-size batches (each batch on
    its own (seed, batch-index) substream) and accumulates moment sums in
    batch order, so the estimate is reproducible.  Returns
    (mean, cov, se_mean, se_cov) where the standard errors let callers
    run k-sigma consistency checks against analytic moments.
    """
    chol = scipy.linalg.cholesky(cov.matrix, lower=True)
    rows, cols = selector.rows, selector.cols
    n_stats = len(selector)
    sum1 = np.zeros(n_stats)
    sum2 = np.zeros((n_stats, n_stats))
    done = 0
    index = 0
    while done < n_snapshots:
        take = min(batch, n_snapshots - done)
        rng = trial_generator(seed, index)
        y = rng.standard_normal((take, cov.channels)) @ chol.T
        z = np.where(y >= 0, 1.0, -1.0)
        phi = z[:, rows] * z[:, cols]
        sum1 += phi.sum(axis=0)
        sum2 += phi.T @ phi
        done += take
        index += 1
    n = float(n_snapshots)
    mean = sum1 / n
    second = sum2 / n
    cov_hat = second - np.outer(mean, mean)
    # phi entries are +-1, so var(phi_p) = 1 - m_p^2, var(phi_p phi_q) =
    # 1 - E_pq^2, and cov(phi_p phi_q, phi_p) = m_q - E_pq m_p.  Delta
    # method on C_pq = E_pq - m_p m_q (empirical plug-ins):
    se_mean = np.sqrt(np.maximum(1.0 - mean**2, 0.0) / n)
    mp = mean[:, None]
    mq = mean[None, :]
    var_cell = (
        (1.0 - second**2)
        + mq**2 * (1.0 - mp**2) + mp**2 * (1.0 - mq**2)
        - 2.0 * mq * (mq - second * mp)
        - 2.0 * mp * (mp - second * mq)
        + 2.0 * mp * mq * cov_hat
    )
    se_cov = np.sqrt(np.maximum(var_cell, 0.0) / n)
    return mean, cov_hat, se_mean, se_cov
