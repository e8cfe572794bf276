"""Reference dynamical systems, training-data generators and the timing harness."""
import csv
import gc
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .exceptions import DomainError, InputError
from .gp_core import TrainingSet
from .gpdm import format_max_len, normalize_max_len, simulate

PP_X0 = np.array([0.3, 0.8])
PP_NOISE_STD = 0.05
PP_TRAIN_TIMES = tuple(range(1, 98, 3))

THOMAS_B = 0.2
THOMAS_DT = 0.01
THOMAS_NOISE_STD = 0.006
THOMAS_GAIN = np.array([2.0, 2.0, 2.0])


def pp_step(x, u):
    """One step of the forced discrete-time predator-prey map."""
    x1, x2 = float(x[0]), float(x[1])
    if not x1 > 0.0:
        raise DomainError(f"prey population must be positive, got {x1}")
    u1, u2 = float(u[0]), float(u[1])
    return np.array([
        x1 * np.exp(1.0 - 0.4 * x1 - (2.0 + 1.2 * u1) * x2 / (1.0 + x1 * x1)),
        x2 * np.exp(1.0 + 0.5 * u1 - (1.5 - u2) * x2 / x1),
    ])


def pp_input(t):
    w = 0.02 * np.pi * t
    return np.array([np.cos(w), np.sin(w)])


def pp_trajectory(x0, T):
    """True states ``x_0..x_T`` under the periodic input."""
    xs = np.empty((T + 1, 2))
    xs[0] = x0
    for t in range(T):
        xs[t + 1] = pp_step(xs[t], pp_input(t))
    return xs


def generate_pp_training(rng, noise=True, noisy_regressors=False):
    """33 transitions ``[x_t; u_t] -> y_{t+1}`` for ``t = 1, 4, ..., 97`` from ``x_0 = [0.3, 0.8]``.

    Targets are next states plus ``N(0, 0.05^2)`` noise (omitted when
    ``noise`` is False). Regressors hold the true states unless
    ``noisy_regressors`` is set.
    """
    xs = pp_trajectory(PP_X0, PP_TRAIN_TIMES[-1] + 1)
    std = PP_NOISE_STD if noise else 0.0
    cols, targets = [], []
    # draw order fixed: regressor noise then target noise, per point
    for t in PP_TRAIN_TIMES:
        x = xs[t] + (std * rng.standard_normal(2) if noisy_regressors else 0.0)
        cols.append(np.concatenate([x, pp_input(t)]))
        targets.append(xs[t + 1] + std * rng.standard_normal(2))
    return TrainingSet(np.array(cols).T, np.array(targets), PP_NOISE_STD**2)


def thomas_rhs(x, u, b=THOMAS_B):
    x = np.asarray(x, dtype=float)
    u = float(np.ravel(u)[0]) if np.ndim(u) else float(u)
    return np.array([
        np.sin(x[1]) - b * x[0] + u,
        np.sin(x[2]) - b * x[1],
        np.sin(x[0]) - b * x[2],
    ])


def rk4_step(x, u, dt, rhs=thomas_rhs):
    """Classical Runge-Kutta step with the input held constant."""
    if not dt > 0.0:
        raise InputError("dt must be positive")
    x = np.asarray(x, dtype=float)
    k1 = rhs(x, u)
    k2 = rhs(x + 0.5 * dt * k1, u)
    k3 = rhs(x + 0.5 * dt * k2, u)
    k4 = rhs(x + dt * k3, u)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def thomas_feedback(x):
    """Set-point law ``u = -[2, 2, 2] x`` returned as a length-1 input."""
    return np.array([-THOMAS_GAIN @ np.asarray(x, dtype=float)])


def thomas_closed_loop(x0, T, dt=THOMAS_DT, policy=thomas_feedback):
    xs = np.empty((T + 1, 3))
    xs[0] = x0
    for t in range(T):
        xs[t + 1] = rk4_step(xs[t], policy(xs[t]), dt)
    return xs


def thomas_lattice():
    """375 regressors: 5 levels per state coordinate on [-1, 1], 3 input levels on [-2, 2]."""
    s = np.linspace(-1.0, 1.0, 5)
    u = np.linspace(-2.0, 2.0, 3)
    g = np.meshgrid(s, s, s, u, indexing="ij")
    return np.stack([a.ravel() for a in g])


def generate_thomas_training(rng, noise=True, dt=THOMAS_DT):
    """Lattice regressors ``[x; u]`` with targets ``rk4_step(x, u, dt)`` plus noise."""
    X = thomas_lattice()
    std = THOMAS_NOISE_STD if noise else 0.0
    Y = np.array([rk4_step(c[:3], c[3], dt) for c in X.T])
    Y = Y + std * rng.standard_normal(Y.shape)
    return TrainingSet(X, Y, THOMAS_NOISE_STD**2)


@dataclass(eq=False)
class TimingTable:
    """Per-step wall time for each memory length; arrays are ``(len(m_bars), T)``."""

    m_bars: list
    step_seconds: np.ndarray

    HEADER = ("t", "m_bar", "step_seconds", "total_seconds")

    @property
    def total_seconds(self):
        return np.cumsum(self.step_seconds, axis=1)

    def window_mean(self, m_bar, lo, hi):
        """Mean step time over steps ``t`` with ``lo <= t <= hi`` (``t`` counts from 1)."""
        j = self.m_bars.index(normalize_max_len(m_bar))
        return float(np.mean(self.step_seconds[j, lo - 1:hi]))

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.HEADER)
        tot = self.total_seconds
        for j, m in enumerate(self.m_bars):
            for t in range(self.step_seconds.shape[1]):
                w.writerow([t + 1, format_max_len(m), repr(float(self.step_seconds[j, t])),
                            repr(float(tot[j, t]))])


def timing_harness(model, T, m_bars, init, policy=None, seed=0):
    """Time ``T`` sampling steps of one trajectory per memory length.

    Runs with BLAS limited to one thread and the garbage collector paused so
    per-step times reflect the linear algebra. ``policy`` is anything
    :func:`~approxgpdm.gpdm.simulate` accepts.
    """
    if T < 100:
        raise InputError("timing runs need T >= 100")
    m_bars = [normalize_max_len(m) for m in m_bars]
    out = np.zeros((len(m_bars), T))
    model._train
    gc_was_enabled = gc.isenabled()
    try:
        with threadpool_limits(limits=1):
            gc.disable()
            for j, m in enumerate(m_bars):
                tr = simulate(model, init, policy, T, m, np.random.default_rng(seed))
                out[j] = tr.step_seconds[1:]
    finally:
        if gc_was_enabled:
            gc.enable()
    return TimingTable(m_bars, out)
