"""Regularization-free factored gradient descent for low-rank matrix estimation."""

from .alignment import (
    AlignmentResult,
    align,
    balanced_factorization,
    gl_align,
    m_star,
    procrustes_align,
)
from .core import (
    AlignmentDiverged,
    DegenerateRank,
    DimensionTooLarge,
    FactorPoint,
    GroundTruth,
    InsufficientDecay,
    InvalidCurvature,
    LowRankError,
    NonFiniteUpdate,
    PopulationUnavailable,
    SpectralStats,
    spectral_stats,
)
from .descent import DescentConfig, Record, Trajectory, default_step, run, step_asym, step_sym
from .diagnostics import (
    CurvatureEstimate,
    NoiseSummary,
    RateFit,
    assemble_augmented_hessian,
    estimate_curvature,
    estimate_rip,
    fit_contraction,
    gradient_fd_check,
    hessian_fd_check,
    noise_summary,
)
from .losses import (
    BernoulliData,
    LossModel,
    SensingData,
    bernoulli_loss,
    noise_gradient,
    quadratic_loss,
    sensing_loss,
)
from .regularizer import (
    PenaltyConfig,
    augmented_value_grad,
    penalty_asym,
    penalty_asym_grad,
    penalty_sym,
    penalty_sym_grad,
)
from .synth import (
    TruthSpec,
    gen_bernoulli,
    gen_gaussian_noise,
    gen_sensing,
    gen_truth,
    oracle_init,
    read_binary_csv,
    spectral_init,
)

__version__ = "0.1.0"
