"""Gaussian-process dynamical models and their finite-memory approximations.

A model predicts the next state (state-space layout) or next output
(output-error layout) from a regressor vector. Exact sampling conditions every
prediction on all previously realized transitions, which enter as noise-free
pseudo training data; a :class:`MemoryBuffer` with finite ``max_len`` keeps
only the newest transitions and turns the sampler into a finite-order Markov
chain.
"""
import math
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg

from . import kernels as kern
from .exceptions import (
    DimensionMismatch,
    InputError,
    InsufficientHistory,
    NumericalBreakdown,
)
from .gp_core import TrainingSet, clamp_variance
from .numerics import DiagGaussian, PDFactor, factor_pd, mvn_sample

SSM = "ssm"
NOE = "noe"
MEMORY_JITTER = 1e-12


def normalize_max_len(max_len):
    """Map ``None``, ``inf`` or ``"inf"`` to ``None`` (unbounded); validate ints."""
    if max_len is None:
        return None
    if isinstance(max_len, str):
        if max_len.strip().lower() == "inf":
            return None
        max_len = int(max_len)
    if isinstance(max_len, float):
        if math.isinf(max_len) and max_len > 0:
            return None
        if not max_len.is_integer():
            raise InputError(f"memory length must be an integer, got {max_len}")
    max_len = int(max_len)
    if max_len < 0:
        raise InputError("memory length must be nonnegative")
    return max_len


def format_max_len(max_len):
    return "inf" if max_len is None else str(max_len)


@dataclass(frozen=True)
class RegressorLayout:
    """How regressors are assembled.

    ``n_y`` is the state dimension for a state-space model and the output
    dimension for an output-error model. ``n_out`` and ``n_in`` are the output
    and input history lengths of the output-error layout.
    """

    kind: str
    n_y: int
    n_u: int = 0
    n_out: int = 1
    n_in: int = 1

    def __post_init__(self):
        if self.kind not in (SSM, NOE):
            raise InputError(f"layout kind must be {SSM!r} or {NOE!r}")
        if self.n_y < 1 or self.n_u < 0:
            raise InputError("layout needs n_y >= 1 and n_u >= 0")
        if self.kind == NOE and (self.n_out < 1 or self.n_in < 1):
            raise InputError("output-error layout needs n_out, n_in >= 1")
        if self.kind == SSM and (self.n_out != 1 or self.n_in != 1):
            raise InputError("state-space layout has no history lengths")

    @classmethod
    def ssm(cls, n_x, n_u=0):
        return cls(SSM, n_x, n_u)

    @classmethod
    def noe(cls, n_y, n_u, n_out, n_in):
        return cls(NOE, n_y, n_u, n_out, n_in)

    @property
    def regressor_dim(self):
        if self.kind == SSM:
            return self.n_y + self.n_u
        return self.n_out * self.n_y + self.n_in * self.n_u

    @property
    def target_dim(self):
        return self.n_y

    def to_dict(self):
        if self.kind == SSM:
            return {"kind": SSM, "n_x": self.n_y, "n_u": self.n_u}
        return {
            "kind": NOE,
            "n_y": self.n_y,
            "n_u": self.n_u,
            "n_out": self.n_out,
            "n_in": self.n_in,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") == SSM:
            return cls.ssm(int(d["n_x"]), int(d.get("n_u", 0)))
        if d.get("kind") == NOE:
            return cls.noe(int(d["n_y"]), int(d["n_u"]), int(d["n_out"]), int(d["n_in"]))
        raise InputError(f"unknown layout {d!r}")


def build_regressor(layout, outputs, inputs=None):
    """Concatenate the newest history into a regressor.

    ``outputs`` and ``inputs`` hold one vector per row, oldest first. The
    state-space regressor is ``[x_t; u_t]``; the output-error regressor is
    ``[y_{t-n_out+1}; ...; y_t; u_{t-n_in+1}; ...; u_t]``.
    """
    Yh = np.asarray(outputs, dtype=float)
    if Yh.ndim == 1:
        Yh = Yh[None, :]
    if Yh.shape[-1] != layout.n_y:
        raise DimensionMismatch(f"outputs must have {layout.n_y} columns")
    need_out = layout.n_out
    need_in = layout.n_in if layout.n_u else 0
    if layout.n_u:
        Uh = np.asarray(inputs if inputs is not None else np.zeros((0, layout.n_u)), dtype=float)
        if Uh.ndim == 1:
            Uh = Uh[None, :]
        if Uh.shape[-1] != layout.n_u:
            raise DimensionMismatch(f"inputs must have {layout.n_u} columns")
    else:
        Uh = np.zeros((0, 0))
    if Yh.shape[0] < need_out or Uh.shape[0] < need_in:
        raise InsufficientHistory(
            f"need {need_out} outputs and {need_in} inputs, "
            f"got {Yh.shape[0]} and {Uh.shape[0]}"
        )
    parts = [Yh[Yh.shape[0] - need_out:].ravel()]
    if need_in:
        parts.append(Uh[Uh.shape[0] - need_in:].ravel())
    return np.concatenate(parts)


class MemoryBuffer:
    """FIFO record of past ``(regressor, sampled target)`` pairs.

    ``max_len=None`` never evicts. ``t`` counts every push, including pairs that
    were evicted or never stored (``max_len=0``).
    """

    def __init__(self, max_len=None):
        self.max_len = normalize_max_len(max_len)
        self._pairs = deque(maxlen=self.max_len)
        self.t = 0

    @property
    def unbounded(self):
        return self.max_len is None

    def __len__(self):
        return len(self._pairs)

    def push(self, regressor, target):
        regressor = np.array(regressor, dtype=float).ravel()
        target = np.array(target, dtype=float).ravel()
        if self._pairs:
            r0, y0 = self._pairs[0]
            if regressor.shape != r0.shape or target.shape != y0.shape:
                raise DimensionMismatch("pair dimensions differ from stored pairs")
        self._pairs.append((regressor, target))
        self.t += 1
        return self

    def pairs(self):
        return list(self._pairs)

    def regressors(self, dim=None):
        if not self._pairs:
            return np.zeros((0, dim or 0))
        return np.array([r for r, _ in self._pairs])

    def targets(self, dim=None):
        if not self._pairs:
            return np.zeros((0, dim or 0))
        return np.array([y for _, y in self._pairs])

    def copy(self):
        other = MemoryBuffer(self.max_len)
        other._pairs.extend(self._pairs)
        other.t = self.t
        return other

    @classmethod
    def from_history(cls, regressors, targets, max_len=None):
        """Buffer state after pushing the given transitions in order."""
        buf = cls(max_len)
        for r, y in zip(regressors, targets):
            buf.push(r, y)
        return buf


def memory_push(buf, regressor, target):
    """Append a pair to ``buf`` in place and return it."""
    return buf.push(regressor, target)


@dataclass(frozen=True)
class OutputMap:
    """Known output map: identity or identity plus Gaussian noise."""

    kind: str = "identity"
    noise_var: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "additive_gaussian"):
            raise InputError(f"unknown output map {self.kind!r}")
        if not self.noise_var >= 0.0:
            raise InputError("output noise variance must be nonnegative")

    def apply(self, x, rng):
        if self.kind == "identity":
            return np.array(x, dtype=float)
        return x + np.sqrt(self.noise_var) * rng.standard_normal(len(x))

    def to_dict(self):
        if self.kind == "identity":
            return {"kind": "identity"}
        return {"kind": self.kind, "noise_var": self.noise_var}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("kind", "identity"), float(d.get("noise_var", 0.0)))


@dataclass(frozen=True, eq=False)
class StepDistribution(DiagGaussian):
    """Gaussian over the next state or output, with the regressor it came from."""

    regressor: np.ndarray = None


@dataclass(frozen=True, eq=False)
class _TrainCache:
    factor: PDFactor
    beta: np.ndarray


@dataclass(frozen=True, eq=False)
class GpdmModel:
    """Learned transition model.

    Memory pairs condition the prediction as exact observations, except that
    their prior variances are inflated by the relative factor ``memory_jitter``.
    Without it, nearly coincident memory regressors make the variance lose
    precision, and the resulting samples destabilize long simulations.
    ``memory_jitter=0`` gives exact noise-free conditioning.
    """

    layout: RegressorLayout
    ds: TrainingSet
    kernel: kern.KernelSpec
    mean: kern.MeanSpec = field(default_factory=kern.MeanSpec.zero)
    output_map: OutputMap = field(default_factory=OutputMap)
    memory_jitter: float = MEMORY_JITTER

    def __post_init__(self):
        if not self.memory_jitter >= 0.0:
            raise InputError("memory_jitter must be nonnegative")
        n = self.layout.regressor_dim
        if self.ds.input_dim != n or self.kernel.input_dim != n:
            raise DimensionMismatch(
                f"layout regressor dim {n}, training inputs {self.ds.input_dim}, "
                f"kernel inputs {self.kernel.input_dim} must agree"
            )
        if self.ds.output_dim != self.layout.target_dim:
            raise DimensionMismatch(
                f"training targets have {self.ds.output_dim} columns, "
                f"layout expects {self.layout.target_dim}"
            )

    @property
    def regressor_dim(self):
        return self.layout.regressor_dim

    @property
    def target_dim(self):
        return self.layout.target_dim

    @cached_property
    def _train(self):
        K = kern.sym_rows(self.kernel, self.ds.rows)
        K[np.diag_indices_from(K)] += self.ds.noise_var
        factor = factor_pd(K)
        resid = self.ds.Y - kern.mean_rows(self.mean, self.ds.rows)[:, None]
        beta = factor.half_solve(resid) if factor.method == "cholesky" else None
        return _TrainCache(factor, beta)


def extended_dataset(model, buf):
    """Training data with the memory appended: memory columns last, newest last."""
    n = model.regressor_dim
    if len(buf) == 0:
        return model.ds.X, model.ds.Y
    M = buf.regressors(n)
    T = buf.targets(model.target_dim)
    return np.hstack([model.ds.X, M.T]), np.vstack([model.ds.Y, T])


def _inflate_diag(K, factor, start=0):
    if factor:
        idx = np.arange(start, K.shape[0])
        K[idx, idx] *= 1.0 + factor
    return K


def gram_extended(model, buf):
    """Block Gram matrix with noise only on the training block."""
    Xt, _ = extended_dataset(model, buf)
    K = kern.sym_rows(model.kernel, Xt.T)
    nd = model.ds.n_points
    _inflate_diag(K, model.memory_jitter, nd)
    idx = np.arange(nd)
    K[idx, idx] += model.ds.noise_var
    return K


def _check_regressor(model, regressor):
    z = np.atleast_1d(np.asarray(regressor, dtype=float))
    if z.shape != (model.regressor_dim,):
        raise DimensionMismatch(
            f"regressor must have {model.regressor_dim} entries, got shape {z.shape}"
        )
    return z


def _predict_dense(model, z, buf):
    Xt, Yt = extended_dataset(model, buf)
    rows = np.ascontiguousarray(Xt.T)
    Kt = gram_extended(model, buf)
    factor = factor_pd(Kt)
    kz = kern.cross_rows(model.kernel, rows, z)[:, 0]
    resid = Yt - kern.mean_rows(model.mean, rows)[:, None]
    mu = kern.mean_eval(model.mean, z) + kz @ factor.solve(resid)
    kzz = kern.kernel_eval(model.kernel, z, z)
    var = kzz - kz @ factor.solve(kz)
    var = clamp_variance(np.full(model.target_dim, var), kzz)
    return StepDistribution(mu, var, z)


def _predict_schur(model, z, buf):
    """Condition on training data through the cached factor, then on memory.

    Returns None when the memory block is numerically degenerate.
    """
    cache = model._train
    L = cache.factor.L
    kernel = model.kernel
    X = model.ds.rows
    kzX = kern.cross_rows(kernel, X, z)[:, 0]
    w = linalg.solve_triangular(L, kzX, lower=True, check_finite=False)
    mu = kern.mean_eval(model.mean, z) + w @ cache.beta
    kzz = kern.kernel_eval(kernel, z, z)
    var = kzz - w @ w
    if len(buf):
        M = buf.regressors()
        T = buf.targets()
        V = linalg.solve_triangular(
            L, kern.cross_rows(kernel, X, M), lower=True, check_finite=False
        )
        S = _inflate_diag(kern.sym_rows(kernel, M), model.memory_jitter) - V.T @ V
        LS = PDFactor._try_cholesky(S)
        if LS is None:
            return None
        c = kern.cross_rows(kernel, M, z)[:, 0] - V.T @ w
        r = T - kern.mean_rows(model.mean, M)[:, None] - V.T @ cache.beta
        g = linalg.cho_solve((LS, True), c, check_finite=False)
        mu = mu + g @ r
        var = var - c @ g
    if not np.all(np.isfinite(mu)):
        return None
    try:
        var = clamp_variance(np.full(model.target_dim, var), kzz)
    except NumericalBreakdown:
        return None
    return StepDistribution(mu, var, z)


def predict(model, regressor, buf, method="auto"):
    """Distribution of the next state/output given the regressor and memory.

    ``method="dense"`` factorizes the full block Gram matrix every call;
    ``"auto"`` reuses the training-block factor and only factorizes the memory
    block, falling back to the dense path if that block is degenerate.
    """
    z = _check_regressor(model, regressor)
    if method not in ("auto", "dense"):
        raise InputError(f"unknown prediction method {method!r}")
    if method == "auto" and model._train.factor.method == "cholesky":
        dist = _predict_schur(model, z, buf)
        if dist is not None:
            return dist
    return _predict_dense(model, z, buf)


def step(model, buf, regressor, rng, mode="sample"):
    """Predict, draw (or take the mean), and push the transition into ``buf``."""
    dist = predict(model, regressor, buf)
    if mode == "sample":
        target = mvn_sample(dist, rng)
    elif mode == "mean":
        target = dist.mean.copy()
    else:
        raise InputError(f"mode must be 'sample' or 'mean', got {mode!r}")
    buf.push(regressor, target)
    return target, dist, buf


@dataclass(eq=False)
class Trajectory:
    """One simulated path.

    Row ``t`` of ``states`` is the sampled state (or output) at time ``t``; row
    ``t`` of ``means``/``variances`` is the distribution it was drawn from, with
    the initial condition and zero variance in row 0. ``regressors[t]`` and
    ``inputs[t]`` drive the transition from ``t`` to ``t + 1``.
    """

    states: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    regressors: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    step_seconds: np.ndarray
    max_len: int = None

    @property
    def T(self):
        return self.states.shape[0] - 1

    @property
    def times(self):
        return np.arange(self.T + 1)

    def distribution(self, t):
        """Step distribution of the transition ``t -> t + 1``."""
        return StepDistribution(self.means[t + 1], self.variances[t + 1], self.regressors[t])


def _policy_input(policy, t, current, n_u):
    if n_u == 0:
        return np.zeros(0)
    if policy is None:
        return np.zeros(n_u)
    if callable(policy):
        u = policy(current)
    else:
        u = np.asarray(policy, dtype=float)[t]
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (n_u,):
        raise DimensionMismatch(f"policy must return {n_u} inputs, got shape {u.shape}")
    return u


def simulate(model, init, policy, T, max_len, rng, mode="sample"):
    """Roll the model forward ``T`` steps with memory capped at ``max_len``.

    ``init`` is the initial state for a state-space model. For an output-error
    model it is ``(outputs, inputs)``: the last ``n_out`` outputs ending at
    ``y_0`` and the ``n_in - 1`` inputs preceding ``u_0``.

    ``policy`` is None (zero input), a ``(T, n_u)`` input sequence, or a
    feedback map from the current state/output to the input.
    """
    layout = model.layout
    n_y, n_u = layout.n_y, layout.n_u
    T = int(T)
    if T < 0:
        raise InputError("T must be nonnegative")
    if layout.kind == SSM:
        y_hist = [np.atleast_1d(np.asarray(init, dtype=float))]
        u_hist = []
        if y_hist[0].shape != (n_y,):
            raise DimensionMismatch(f"initial state must have {n_y} entries")
    else:
        y0, u0 = init
        y_hist = [np.asarray(r, dtype=float) for r in np.atleast_2d(y0)]
        u_hist = [] if u0 is None else [np.asarray(r, dtype=float) for r in np.atleast_2d(u0) if np.size(r)]
        if len(y_hist) < layout.n_out:
            raise InsufficientHistory(f"need {layout.n_out} initial outputs")
        if n_u and len(u_hist) < layout.n_in - 1:
            raise InsufficientHistory(f"need {layout.n_in - 1} initial inputs")

    buf = MemoryBuffer(max_len)
    states = np.empty((T + 1, n_y))
    means = np.empty((T + 1, n_y))
    variances = np.zeros((T + 1, n_y))
    regressors = np.empty((T, layout.regressor_dim))
    inputs = np.empty((T, n_u))
    outputs = np.empty((T + 1, n_y))
    seconds = np.zeros(T + 1)
    states[0] = means[0] = y_hist[-1]
    outputs[0] = model.output_map.apply(states[0], rng)

    for t in range(T):
        t0 = time.perf_counter()
        u = _policy_input(policy, t, y_hist[-1], n_u)
        if n_u:
            u_hist.append(u)
        if layout.kind == SSM:
            z = np.concatenate([y_hist[-1], u])
        else:
            z = build_regressor(layout, y_hist[-layout.n_out:], u_hist[-layout.n_in:] if n_u else None)
        target, dist, buf = step(model, buf, z, rng, mode)
        seconds[t + 1] = time.perf_counter() - t0
        y_hist.append(target)
        # bounded histories keep long runs O(1) in memory
        if len(y_hist) > layout.n_out + 1:
            y_hist.pop(0)
        if len(u_hist) > layout.n_in + 1:
            u_hist.pop(0)
        states[t + 1] = target
        means[t + 1] = dist.mean
        variances[t + 1] = dist.var
        regressors[t] = z
        inputs[t] = u
        outputs[t + 1] = model.output_map.apply(target, rng)
    return Trajectory(states, means, variances, regressors, inputs, outputs, seconds,
                      normalize_max_len(max_len))


def trajectory_rng(seed, index):
    """Independent per-trajectory stream: child ``index`` of ``SeedSequence(seed)``.

    ``seed`` is an int or a sequence of ints.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(index),)))


def simulate_many(model, inits, policy, T, max_len, seed, mode="sample", n_jobs=1):
    """Simulate one trajectory per initial condition with per-index streams.

    Results do not depend on ``n_jobs``.
    """
    def run(i):
        return simulate(model, inits[i], policy, T, max_len, trajectory_rng(seed, i), mode)

    model._train  # build the shared cache before threads race on it
    if n_jobs == 1:
        return [run(i) for i in range(len(inits))]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(run, range(len(inits))))
