"""Detection analysis for sensor arrays with one-bit (sign) quantization.

Designs likelihood-style linear tests on the pair statistics of the
quantized snapshots, evaluates their asymptotic ROC performance, and
validates the analysis by seedable Monte Carlo simulation.
"""

from .array_model import (
    ArrayConfig,
    ReceiveCovariance,
    SteeringMatrix,
    build_steering,
    correlation_normalize,
    receive_covariance,
)
from .detector import (
    ConditioningError,
    DetectorDesign,
    RocCurve,
    asymptotic_rates,
    design_detector,
    design_gaussian,
    design_onebit,
    qfunc,
    qfunc_inv,
    roc_quality,
    surrogate_weights,
    test_statistic,
)
from .gaussian_moments import GaussianStats, gaussian_stat_moments, gaussian_weight_vector
from .montecarlo import (
    SimConfig,
    TrialOutcome,
    empirical_rates,
    empirical_stat_moments,
    quantize,
    sample_snapshots,
    simulate_statistics,
    trial_generator,
)
from .onebit_moments import (
    StatMoments,
    StatSelector,
    arcsine_covariance,
    exact_binary_pmf,
    onebit_stat_moments,
    sign_fourth_moment,
)
from .orthant import (
    QuadratureError,
    orthant_bivariate,
    orthant_quadrivariate,
    sign_pattern_probability,
)

__version__ = "0.1.0"
