"""Single Gaussian-process regression over a fixed training set.

All output dimensions share one kernel and one noise variance.
"""
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from . import kernels as kern
from .exceptions import (
    DimensionMismatch,
    InputError,
    NoImprovementWarning,
    NumericalBreakdown,
)
from .numerics import DiagGaussian, factor_pd

VAR_CLAMP_BAND = 1e-9
INIT_RANGE = (1e-2, 1e2)
LOG_BOUNDS = (np.log(1e-6), np.log(1e6))

# posterior over the outputs at one test input
GpPosterior = DiagGaussian


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Inputs ``X`` with shape ``(n, n_D)`` (one column per point), targets ``Y``
    with shape ``(n_D, n_f)`` and the measurement noise variance."""

    X: np.ndarray
    Y: np.ndarray
    noise_var: float

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise DimensionMismatch("X and Y must be 2-D")
        if X.shape[1] != Y.shape[0]:
            raise DimensionMismatch(
                f"X has {X.shape[1]} columns but Y has {Y.shape[0]} rows"
            )
        if X.shape[1] < 1:
            raise InputError("training set needs at least one point")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InputError("training data must be finite")
        if not self.noise_var >= 0.0:
            raise InputError("noise variance must be nonnegative")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "noise_var", float(self.noise_var))
        object.__setattr__(self, "_rows", np.ascontiguousarray(X.T))

    @property
    def input_dim(self):
        return self.X.shape[0]

    @property
    def n_points(self):
        return self.X.shape[1]

    @property
    def output_dim(self):
        return self.Y.shape[1]

    @property
    def rows(self):
        """Training inputs as a contiguous ``(n_D, n)`` array."""
        return self._rows

    def with_noise(self, noise_var):
        return replace(self, noise_var=noise_var)


def clamp_variance(var, prior_var):
    """Zero out tiny negative variances from rounding; fail on larger ones."""
    var = np.asarray(var, dtype=float)
    band = VAR_CLAMP_BAND * np.maximum(1.0, np.abs(prior_var))
    if np.any(var < -band):
        raise NumericalBreakdown(
            f"posterior variance {var.min():.3e} is negative beyond rounding"
        )
    return np.maximum(var, 0.0)


def _residuals(ds, mean):
    return ds.Y - kern.mean_rows(mean, ds.rows)[:, None]


def _regularized_factor(ds, kernel):
    K = kern.sym_rows(kernel, ds.rows)
    K[np.diag_indices_from(K)] += ds.noise_var
    return factor_pd(K)


def posterior(ds, kernel, mean, z):
    """Predictive mean and variance of every output dimension at ``z``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (ds.input_dim,):
        raise DimensionMismatch(
            f"test input must have {ds.input_dim} entries, got shape {z.shape}"
        )
    factor = _regularized_factor(ds, kernel)
    kz = kern.cross_rows(kernel, ds.rows, z)[:, 0]
    alpha = factor.solve(_residuals(ds, mean))
    mu = kern.mean_eval(mean, z) + kz @ alpha
    kzz = kern.kernel_eval(kernel, z, z)
    var = kzz - kz @ factor.solve(kz)
    var = clamp_variance(np.full(ds.output_dim, var), kzz)
    return GpPosterior(mu, var)


def log_marginal_likelihood(ds, kernel, mean):
    """Log-evidence summed over output dimensions, and its gradient.

    The gradient is taken with respect to ``kernel.log_params`` followed by the
    log noise variance.
    """
    if ds.input_dim != kernel.input_dim:
        raise DimensionMismatch("kernel and training set disagree on input dim")
    K, dK = kern.gram_grad_rows(kernel, ds.rows)
    n, nf = ds.n_points, ds.output_dim
    A = K.copy()
    A[np.diag_indices_from(A)] += ds.noise_var
    factor = factor_pd(A)
    if factor.method != "cholesky":
        raise NumericalBreakdown("regularized Gram matrix is not positive definite")
    R = _residuals(ds, mean)
    alpha = factor.solve(R)
    value = (
        -0.5 * float(np.sum(R * alpha))
        - 0.5 * nf * factor.logdet
        - 0.5 * nf * n * np.log(2.0 * np.pi)
    )
    W = alpha @ alpha.T - nf * factor.inverse()
    grad = [0.5 * float(np.sum(W * G)) for G in dK]
    grad.append(0.5 * ds.noise_var * float(np.trace(W)))
    return value, np.array(grad)


@dataclass(frozen=True, eq=False)
class HyperParams:
    """Fitted hyperparameters in the log domain.

    ``improved`` is False when no local search beat its own starting point; the
    best initialization is returned in that case.
    """

    family: str
    input_dim: int
    log_params: np.ndarray
    log_noise_var: float
    log_likelihood: float = float("nan")
    improved: bool = True

    @property
    def noise_var(self):
        return float(np.exp(self.log_noise_var))

    def kernel(self):
        return kern.KernelSpec(self.family, self.input_dim, self.log_params)

    def training_set(self, ds):
        return ds.with_noise(self.noise_var)


def fit_hyperparameters(
    ds,
    family,
    mean,
    restarts=5,
    seed=0,
    fit_noise=True,
    maxiter=500,
):
    """Maximize the log-evidence with multi-start L-BFGS-B.

    Starting points are log-uniform on ``[1e-2, 1e2]`` per parameter (including
    the noise variance when ``fit_noise``), drawn from ``seed``. When
    ``fit_noise`` is False the training set's noise variance is kept.
    """
    if restarts < 1:
        raise InputError("restarts must be at least 1")
    d = ds.input_dim
    n_kernel = kern.n_params(family, d)
    n_free = n_kernel + (1 if fit_noise else 0)
    if n_free == 0:
        raise InputError("nothing to fit: kernel has no parameters and noise is fixed")
    if not fit_noise and ds.noise_var <= 0.0:
        raise InputError("fixed noise variance must be positive")
    fixed_log_noise = None if fit_noise else float(np.log(ds.noise_var))

    def unpack(theta):
        log_noise = theta[n_kernel] if fit_noise else fixed_log_noise
        return theta[:n_kernel], log_noise

    def objective(theta):
        lp, log_noise = unpack(theta)
        kernel = kern.KernelSpec(family, d, lp)
        try:
            val, grad = log_marginal_likelihood(
                ds.with_noise(np.exp(log_noise)), kernel, mean
            )
        except NumericalBreakdown:
            return np.inf, np.zeros_like(theta)
        if not np.isfinite(val):
            return np.inf, np.zeros_like(theta)
        return -val, -grad[:n_free]

    rng = np.random.default_rng(seed)
    lo, hi = np.log(INIT_RANGE[0]), np.log(INIT_RANGE[1])
    starts = rng.uniform(lo, hi, size=(restarts, n_free))
    bounds = [LOG_BOUNDS] * n_free

    best_theta, best_val = None, np.inf
    best_init_theta, best_init_val = None, np.inf
    for theta0 in starts:
        f0, _ = objective(theta0)
        if f0 < best_init_val:
            best_init_theta, best_init_val = theta0, f0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(
                objective,
                theta0,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": maxiter},
            )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_theta, best_val = res.x, float(res.fun)

    if best_theta is None and best_init_theta is None:
        raise NumericalBreakdown("log-evidence is not finite at any starting point")
    improved = bool(best_theta is not None and best_val < best_init_val)
    if not improved:
        warnings.warn(
            "hyperparameter search did not improve on the initializations",
            NoImprovementWarning,
            stacklevel=2,
        )
        best_theta, best_val = best_init_theta, best_init_val
    lp, log_noise = unpack(np.asarray(best_theta, dtype=float))
    return HyperParams(
        family=family,
        input_dim=d,
        log_params=np.array(lp, dtype=float),
        log_noise_var=float(log_noise),
        log_likelihood=-float(best_val),
        improved=improved,
    )
