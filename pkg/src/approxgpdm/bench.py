"""Compare the compiled and pure-Python kernel backends.

Two workloads: raw squared-exponential Gram matrices at several sizes, and a
short closed-loop simulation of a model fitted to the lattice training set,
where kernel evaluations compete with the linear algebra. Sampled paths are
sensitive to last-bit differences in the kernel values, so the simulation
difference column is not expected to be zero.
"""
import csv
import time

import numpy as np
from threadpoolctl import threadpool_limits

from . import _backend, kernels
from .gp_core import fit_hyperparameters
from .gpdm import GpdmModel, RegressorLayout, simulate
from .systems import generate_thomas_training, thomas_feedback

HEADER = ("workload", "size", "backend", "seconds", "max_abs_diff")


def _best_of(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(sizes=(50, 200, 800), dim=4, sim_steps=200, m_bar=10, repeats=3, seed=0):
    """Time every available backend; returns rows matching :data:`HEADER`.

    ``max_abs_diff`` is measured against the first backend on the same inputs.
    """
    rng = np.random.default_rng(seed)
    spec = kernels.KernelSpec.se_ard(1.3, np.linspace(0.5, 2.0, dim))
    ds = generate_thomas_training(np.random.default_rng([seed, 1]))
    hp = fit_hyperparameters(ds, kernels.SE_ARD, kernels.MeanSpec.zero(), restarts=1,
                             seed=seed, fit_noise=False)
    rows = []
    previous = _backend.BACKEND
    try:
        with threadpool_limits(limits=1):
            for n in sizes:
                A = rng.uniform(-2.0, 2.0, (n, dim))
                ref = None
                for name in _backend.available_backends():
                    _backend.set_backend(name)
                    sec, K = _best_of(lambda: kernels.sym_rows(spec, A), repeats)
                    ref = K if ref is None else ref
                    rows.append(("gram", n, name, sec, float(np.max(np.abs(K - ref)))))
            ref = None
            for name in _backend.available_backends():
                _backend.set_backend(name)
                model = GpdmModel(RegressorLayout.ssm(3, 1), ds, hp.kernel())

                def sim():
                    return simulate(model, [0.5, 0.2, -0.3], thomas_feedback, sim_steps, m_bar,
                                    np.random.default_rng(seed)).states
                sec, states = _best_of(sim, repeats)
                ref = states if ref is None else ref
                rows.append(("simulate", sim_steps, name, sec, float(np.max(np.abs(states - ref)))))
    finally:
        _backend.set_backend(previous)
    return rows


def write_csv(fh, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow([r[0], r[1], r[2], repr(r[3]), repr(r[4])])
