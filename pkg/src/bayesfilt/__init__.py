"""Recursive Bayesian state estimation: Kalman and particle filters,
Gaussian-process regression, and particle filtering with GP-learned
dynamics. Hot numeric kernels run through a compiled extension when
available (see :mod:`bayesfilt.backend`)."""

from .backend import USING_COMPILED, backend_name
from .gauss import (
    DimensionMismatch,
    Gaussian,
    NotPositiveDefinite,
    NotSquare,
    NotSymmetric,
    chol_solve,
    cholesky,
    mvn_logpdf,
    mvn_sample,
    stream,
    substreams,
)
from .gp import (
    ConstantMean,
    GpPosterior,
    GpPrior,
    NoisyExponential,
    QuasiPeriodic,
    RationalQuadratic,
    SquaredExponential,
    Sum,
    ZeroMean,
    condition,
    cross_gram,
    gram,
    kernel_eval,
    log_marginal_likelihood,
    lml_gradients,
    predict,
    prior_sample,
)
from .gp_pf import GpDynamicsModel, gp_particle_filter, learn_dynamics
from .gp_train import AllRestartsFailed, TrainConfig, TrainReport, train
from .kalman import KalmanState, SingularInnovation, filter_sequence
from .kalman import predict as kalman_predict
from .kalman import update as kalman_update
from .smc import (
    ParticleSet,
    PfStep,
    ProposalKind,
    ZeroTotalWeight,
    ess,
    importance_estimate,
    mc_integrate,
    particle_filter,
    run_bootstrap_filter,
    sis_step,
    systematic_resample,
)
from .ssm import (
    GridFilterResult,
    GridUnderflow,
    LinearGaussianSSM,
    NonlinearSSM,
    Trajectory,
    ar2_model,
    grid_filter,
    nonlinear_from_linear_1d,
    simulate,
    ungm_autonomous,
    ungm_model,
    ungm_observe,
    ungm_transition,
)

__version__ = "0.1.0"

__all__ = [
    "AllRestartsFailed",
    "ConstantMean",
    "DimensionMismatch",
    "Gaussian",
    "GpDynamicsModel",
    "GpPosterior",
    "GpPrior",
    "GridFilterResult",
    "GridUnderflow",
    "KalmanState",
    "LinearGaussianSSM",
    "NoisyExponential",
    "NonlinearSSM",
    "NotPositiveDefinite",
    "NotSquare",
    "NotSymmetric",
    "ParticleSet",
    "PfStep",
    "ProposalKind",
    "QuasiPeriodic",
    "RationalQuadratic",
    "SingularInnovation",
    "SquaredExponential",
    "Sum",
    "TrainConfig",
    "TrainReport",
    "Trajectory",
    "USING_COMPILED",
    "ZeroMean",
    "ZeroTotalWeight",
    "ar2_model",
    "backend_name",
    "chol_solve",
    "cholesky",
    "condition",
    "cross_gram",
    "ess",
    "filter_sequence",
    "gp_particle_filter",
    "gram",
    "grid_filter",
    "importance_estimate",
    "kalman_predict",
    "kalman_update",
    "kernel_eval",
    "learn_dynamics",
    "log_marginal_likelihood",
    "lml_gradients",
    "mc_integrate",
    "mvn_logpdf",
    "mvn_sample",
    "nonlinear_from_linear_1d",
    "particle_filter",
    "predict",
    "prior_sample",
    "run_bootstrap_filter",
    "simulate",
    "sis_step",
    "stream",
    "substreams",
    "systematic_resample",
    "train",
    "ungm_autonomous",
    "ungm_model",
    "ungm_observe",
    "ungm_transition",
]
