"""Error measures between exact and finite-memory predictions, and moment bounds."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import kernels as kern
from .exceptions import DegenerateVariance, InputError, ZeroInitialState
from .gp_core import TrainingSet
from .gpdm import GpdmModel, MemoryBuffer, RegressorLayout, format_max_len, normalize_max_len, predict
from .numerics import abs_moment_quadrature, factor_pd

DEGENERATE_VAR = 1e-300
DISTINCT_TOL = 1e-9


def kl_step(true_d, approx_d):
    """KL divergence from the exact to the approximate step distribution.

    Summed over independent coordinates; requires strictly positive variances.
    """
    f_inf, F_inf = true_d.mean, true_d.var
    f_m, F_m = approx_d.mean, approx_d.var
    if f_inf.shape != f_m.shape:
        raise InputError("distributions have different dimensions")
    if np.array_equal(f_inf, f_m) and np.array_equal(F_inf, F_m):
        return 0.0
    if np.any(F_inf <= DEGENERATE_VAR) or np.any(F_m <= DEGENERATE_VAR):
        raise DegenerateVariance("KL divergence needs strictly positive variances")
    delta = f_m - f_inf
    terms = (F_inf + delta**2) / F_m + np.log(F_m / F_inf) - 1.0
    return max(0.0, 0.5 * float(np.sum(terms)))


def mspe_step(true_d, approx_d):
    """Expected squared distance between independent draws of the two distributions."""
    delta = true_d.mean - approx_d.mean
    return float(delta @ delta) + true_d.trace + approx_d.trace


def pairwise_distinct_prefix(regressors, tol=DISTINCT_TOL):
    """``out[t]`` is True when regressors ``0..t`` are pairwise farther apart than ``tol``."""
    R = np.asarray(regressors, dtype=float)
    n = R.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    if n == 1:
        return np.ones(1, dtype=bool)
    D = squareform(pdist(R))
    np.fill_diagonal(D, np.inf)
    # first index that is too close to some earlier one
    close = np.tril(D <= tol).any(axis=1)
    return np.logical_not(np.cumsum(close) > 0)


@dataclass(eq=False)
class ErrorReport:
    """Per-step KL, MSPE and trace of variance for each memory length.

    Arrays have shape ``(len(m_bars), T)``. KL is NaN where a variance vanished
    (a regressor was revisited exactly), since the divergence is undefined there.
    """

    m_bars: list
    kl: np.ndarray
    mspe: np.ndarray
    trace_var: np.ndarray
    distinct: np.ndarray
    seed: int = None
    trajectory_id: int = None
    meta: dict = field(default_factory=dict)

    @property
    def T(self):
        return self.kl.shape[1]

    HEADER = ("t", "m_bar", "kl", "mspe", "trace_var", "distinct")

    def rows(self):
        for t in range(self.T):
            for j, m in enumerate(self.m_bars):
                yield (
                    t,
                    format_max_len(m),
                    float(self.kl[j, t]),
                    float(self.mspe[j, t]),
                    float(self.trace_var[j, t]),
                    int(self.distinct[t]),
                )

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.HEADER)
        for row in self.rows():
            w.writerow([row[0], row[1]] + [repr(v) for v in row[2:5]] + [row[5]])


def compare_memories(model, regressors, targets, m_bars, seed=None, trajectory_id=None):
    """Replay a recorded history under several memory lengths.

    At each ``t`` the step distribution for ``regressors[t]`` is computed with
    the full history ``0..t-1`` as memory and with each truncated memory, then
    compared.
    """
    R = np.atleast_2d(np.asarray(regressors, dtype=float))
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if R.shape[0] != Y.shape[0]:
        raise InputError("history needs one target per regressor")
    m_bars = [normalize_max_len(m) for m in m_bars]
    T = R.shape[0]
    full = MemoryBuffer(None)
    bufs = [MemoryBuffer(m) for m in m_bars]
    kl = np.zeros((len(m_bars), T))
    mspe = np.zeros_like(kl)
    trace = np.zeros_like(kl)
    for t in range(T):
        exact = predict(model, R[t], full)
        for j, buf in enumerate(bufs):
            approx = exact if buf.unbounded or len(buf) == len(full) else predict(model, R[t], buf)
            try:
                kl[j, t] = kl_step(exact, approx)
            except DegenerateVariance:
                kl[j, t] = np.nan
            mspe[j, t] = mspe_step(exact, approx)
            trace[j, t] = approx.trace
            buf.push(R[t], Y[t])
        full.push(R[t], Y[t])
    return ErrorReport(m_bars, kl, mspe, trace, pairwise_distinct_prefix(R), seed, trajectory_id)


@dataclass(frozen=True)
class BoundednessBound:
    c1: float
    c2: float
    p: int
    bound: float
    k_max: float
    m_max: float


def boundedness_bound(ds, kernel, mean, p, n_x=None):
    """Ultimate bound on ``E||x_t||^p`` for a bounded kernel and bounded mean.

    ``c1 = m_max + n_D k_max max_i ||(K + s_n^2 I)^{-1} (Y - m(X))_i||`` and
    ``c2 = k_max s_n^2 / (k_max + s_n^2)``; the bound is ``n_x E|N(c1, 1/c2)|^p``.
    """
    k_max = kernel.k_max
    if not ds.noise_var > 0.0:
        raise InputError("the bound needs a positive noise variance")
    p = int(p)
    if p < 1:
        raise InputError("p must be a positive integer")
    n_x = ds.output_dim if n_x is None else int(n_x)
    K = kern.sym_rows(kernel, ds.rows)
    K[np.diag_indices_from(K)] += ds.noise_var
    resid = ds.Y - kern.mean_rows(mean, ds.rows)[:, None]
    alpha = factor_pd(K).solve(resid)
    m_max = mean.bound
    c1 = m_max + ds.n_points * k_max * float(np.max(np.linalg.norm(alpha, axis=0)))
    c2 = k_max * ds.noise_var / (k_max + ds.noise_var)
    bound = n_x * abs_moment_quadrature(p, c1, c2)
    return BoundednessBound(c1, c2, p, bound, k_max, m_max)


def _std_normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def unbounded_probability(x0, delta_y):
    """Closed-form escape probability for the two-point linear-kernel model.

    Evaluates ``1 + Phi((-3|x0| + dY) / x0^2) - Phi((3|x0| + dY) / x0^2)``
    with ``dY = Y1 - Y2``. This expression does not agree with direct sampling
    of the model; :func:`slope_escape_probability` gives the sampled value.
    """
    x0 = float(x0)
    if x0 == 0.0:
        raise ZeroInitialState("initial state must be nonzero")
    a = abs(x0)
    return 1.0 + _std_normal_cdf((-3.0 * a + delta_y) / x0**2) - _std_normal_cdf(
        (3.0 * a + delta_y) / x0**2
    )


def slope_escape_probability(x0, delta_y):
    """``P(|x1 / x0| > 1)`` when ``x1 ~ N(-x0 dY / 3, x0^2 / 3)``, ``dY = Y1 - Y2``.

    The slope ``x1 / x0`` is ``N(-dY / 3, 1 / 3)`` whatever the value of ``x0``.
    """
    if float(x0) == 0.0:
        raise ZeroInitialState("initial state must be nonzero")
    mu = -delta_y / 3.0
    s = math.sqrt(3.0)
    return 1.0 - _std_normal_cdf(s * (1.0 - mu)) + _std_normal_cdf(s * (-1.0 - mu))


def linear_counterexample_model(y1, y2):
    """One-state model with linear kernel, unit noise and two training points.

    Regressors ``[x; u]`` are ``[-1; 0]`` and ``[1; 0]`` with targets ``y1, y2``;
    the one-step prediction from ``[x; 0]`` with empty memory is
    ``N(x (y2 - y1) / 3, x^2 / 3)``.
    """
    ds = TrainingSet(np.array([[-1.0, 1.0], [0.0, 0.0]]), np.array([[y1], [y2]]), 1.0)
    return GpdmModel(RegressorLayout.ssm(1, 1), ds, kern.KernelSpec.linear(2))


def empirical_moment(trajectories, p):
    """Average of ``||x_t||^p`` across trajectories, per ``t``.

    Accepts :class:`~approxgpdm.gpdm.Trajectory` objects or ``(T + 1, n)``
    state arrays of equal length.
    """
    states = [getattr(tr, "states", tr) for tr in trajectories]
    if not states:
        raise InputError("need at least one trajectory")
    S = np.stack([np.atleast_2d(np.asarray(s, dtype=float)) for s in states])
    return np.mean(np.linalg.norm(S, axis=2) ** p, axis=0)
