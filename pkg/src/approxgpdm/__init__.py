"""Gaussian-process dynamical models with finite-memory Markov approximations."""
__version__ = "0.1.0"

from ._backend import BACKEND, available_backends, set_backend
from .analysis import (
    BoundednessBound,
    ErrorReport,
    boundedness_bound,
    compare_memories,
    empirical_moment,
    kl_step,
    mspe_step,
    slope_escape_probability,
    unbounded_probability,
)
from .exceptions import *  # noqa: F401,F403
from .gp_core import (
    GpPosterior,
    HyperParams,
    TrainingSet,
    fit_hyperparameters,
    log_marginal_likelihood,
    posterior,
)
from .gpdm import (
    GpdmModel,
    MemoryBuffer,
    OutputMap,
    RegressorLayout,
    StepDistribution,
    Trajectory,
    build_regressor,
    extended_dataset,
    gram_extended,
    memory_push,
    predict,
    simulate,
    simulate_many,
    step,
)
from .kernels import KernelSpec, MeanSpec, gram, kernel_eval, kernel_grad_hyper
from .numerics import (
    DiagGaussian,
    abs_moment_quadrature,
    chol_solve_pd,
    factor_pd,
    mvn_sample,
    pseudo_inverse_solve,
)
