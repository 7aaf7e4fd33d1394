"""Weighted row subsamples of tall matrices that preserve lp, p-ReLU and
logistic objectives, built by augmenting lp sensitivity sampling with l2
leverage scores and a uniform floor."""

from .calibrate import (
    instance_fingerprint,
    load_calibration,
    logistic_alpha,
    subspace_alpha,
)
from .distortion import (
    DistortionReport,
    distortion_ascent,
    distortion_random,
    distortion_ratio,
    grid_certify,
    rank_preserved,
)
from .errors import ConvergenceError, MatrixFormatError, MuUnboundedError, NonFiniteLossError
from .hardness import HardInstance, hard_instance, lowerbound_experiment, matched_augmented_plan
from .logistic import (
    LogisticCoreset,
    QualityReport,
    coreset_quality_report,
    load_labeled_csv,
    logistic_coreset,
    logistic_loss_split,
    logistic_sampling_plan,
    train_weighted_logistic,
)
from .matrix import (
    OrthonormalFactor,
    as_matrix,
    gen_gaussian,
    gen_heavy_tail,
    gen_stacked_identity,
    load_matrix,
    orthonormal_basis,
    rank,
    save_matrix,
)
from .rng import child_rng, seed_path
from .sampling import (
    Loss,
    SamplingPlan,
    WeightedSample,
    abs_loss,
    augmented_plan,
    draw,
    logistic_loss,
    loss_eval,
    pure_lp_plan,
    relu_loss,
    uniform_plan,
    weighted_inf,
    weighted_inf_p,
    weighted_norm,
)
from .scores import (
    MuEstimate,
    ScoreVector,
    exact_lp_sensitivities,
    exact_lp_sensitivity_row,
    l2_leverage,
    l2_relax_upper_bounds,
    lewis_weights,
    mu_estimate,
)

__version__ = "0.1.0"
