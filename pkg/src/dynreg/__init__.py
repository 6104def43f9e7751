"""Online meta-learning with time-smoothed adaptive gradients.

The package plays an online learner against drifting sine task streams,
measures dynamic and static local regret of the smoothed-gradient
iterates, evaluates the matching closed-form guarantees, and numerically
verifies the scalar inequalities those guarantees lean on.
"""

from .backends import active_backend, available_backends, resolve_backend
from .lemmas import FULL_IDS, QUICK_IDS, LemmaCheckResult, run_checks
from .meta import (
    InnerAdaptConfig,
    MetaLearnerState,
    RoundLoss,
    RoundRecord,
    RunTrace,
    inner_adapt,
    make_meta_state,
    run_round,
    run_stream,
)
from .numerics import (
    ConfigError,
    DimensionError,
    NumericError,
    RngStream,
    VerificationError,
    spawn_rng_stream,
)
from .optimizer import (
    OptimizerConfig,
    OptimizerState,
    SmoothingWindow,
    alpha_weights,
    dts_ag_step,
    make_config_adagrad,
    make_config_adam,
    make_state,
    smoothed_stochastic_gradient,
    step_size_at,
    weight_sum_W,
)
from .regret import (
    ADAGRAD,
    ADAM,
    THEOREMS,
    BoundReport,
    EffectiveConstants,
    LogFit,
    RegretLedger,
    VarianceProxy,
    bound_expectation,
    bound_highprob,
    dlr_cumulative,
    effective_constants,
    exact_smoothed_gradient,
    logarithmic_fit,
    slr_cumulative,
    variance_proxy,
)
from .tasks import (
    EXACT,
    GAUSSIAN,
    SUBGAUSSIAN,
    LossConstants,
    NoiseModel,
    TaskRound,
    loss_constants,
    make_drifting_sine_stream,
    make_piecewise_drift_stream,
    make_sine_task,
    sample_stochastic_gradient,
    sub_gaussian_scale,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ConfigError",
    "DimensionError",
    "NumericError",
    "VerificationError",
    "RngStream",
    "spawn_rng_stream",
    "EXACT",
    "GAUSSIAN",
    "SUBGAUSSIAN",
    "LossConstants",
    "NoiseModel",
    "TaskRound",
    "loss_constants",
    "sub_gaussian_scale",
    "make_sine_task",
    "make_drifting_sine_stream",
    "make_piecewise_drift_stream",
    "sample_stochastic_gradient",
    "OptimizerConfig",
    "OptimizerState",
    "SmoothingWindow",
    "alpha_weights",
    "weight_sum_W",
    "make_config_adagrad",
    "make_config_adam",
    "make_state",
    "smoothed_stochastic_gradient",
    "step_size_at",
    "dts_ag_step",
    "InnerAdaptConfig",
    "RoundLoss",
    "MetaLearnerState",
    "RoundRecord",
    "RunTrace",
    "inner_adapt",
    "make_meta_state",
    "run_round",
    "run_stream",
    "ADAGRAD",
    "ADAM",
    "THEOREMS",
    "BoundReport",
    "EffectiveConstants",
    "LogFit",
    "RegretLedger",
    "VarianceProxy",
    "bound_expectation",
    "bound_highprob",
    "dlr_cumulative",
    "slr_cumulative",
    "effective_constants",
    "exact_smoothed_gradient",
    "logarithmic_fit",
    "variance_proxy",
    "active_backend",
    "available_backends",
    "resolve_backend",
    "QUICK_IDS",
    "FULL_IDS",
    "LemmaCheckResult",
    "run_checks",
]
