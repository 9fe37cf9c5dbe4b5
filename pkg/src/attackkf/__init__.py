"""Kalman filtering and RTS smoothing for measurements under DoS and FDI attacks."""

from .attacks import (
    AttackParams,
    AttackRealization,
    AttackType,
    attack_sequence,
    classify_attack,
    sample_attack,
)
from .filtering import (
    FilterStepRecord,
    SmootherResult,
    filter_pass,
    predict,
    proposed_kf_rtss,
    rts_backward,
    standard_kf_rtss,
    update,
)
from .gslr import (
    GslrApproximation,
    PredictedMeasurementMoments,
    ThetaParams,
    additive_offset_cov,
    gslr_params,
    mc_moment_oracle,
    mixing_second_moment,
    mixing_variance,
    predicted_cov,
    predicted_cross_cov,
    predicted_mean,
)
from .harness import (
    METHODS,
    CtScenario,
    McResult,
    build_ct_model,
    default_scenario,
    rmse_from_errors,
    run_monte_carlo,
)
from .models import (
    GaussianBelief,
    LinearGaussianModel,
    SingularCovarianceError,
    Trajectory,
    simulate_trajectory,
    validate_model,
)

__version__ = "0.1.0"
