"""Covariance and mean function families.

Squared-exponential kernels use the convention without a factor one half::

    k(a, b) = s^2 * exp(-(a - b)^T P^{-1} (a - b)),   P = diag(l_1^2, ..., l_n^2)

so lengthscales differ by sqrt(2) from the more common ``exp(-r^2 / 2 l^2)`` form.
Hyperparameters are stored as logs of ``(s, l_1, ..., l_n)``; the linear kernel
``k(a, b) = a^T b`` has none.
"""
from dataclasses import dataclass

import numpy as np

from . import _backend
from .exceptions import DimensionMismatch, InputError, UnboundedKernel

SE_ARD = "se_ard"
SE_ISO = "se_iso"
LINEAR = "linear"
FAMILIES = (SE_ARD, SE_ISO, LINEAR)


def n_params(family, input_dim):
    if family == SE_ARD:
        return 1 + input_dim
    if family == SE_ISO:
        return 2
    if family == LINEAR:
        return 0
    raise InputError(f"unknown kernel family {family!r}; expected one of {FAMILIES}")


@dataclass(frozen=True, eq=False)
class KernelSpec:
    family: str
    input_dim: int
    log_params: np.ndarray = None

    def __post_init__(self):
        if self.input_dim < 1:
            raise InputError("input_dim must be at least 1")
        expected = n_params(self.family, self.input_dim)
        lp = np.zeros(0) if self.log_params is None else self.log_params
        lp = np.atleast_1d(np.asarray(lp, dtype=float)).copy()
        if lp.shape != (expected,):
            raise InputError(
                f"{self.family} kernel on {self.input_dim} inputs needs {expected} "
                f"parameters, got {lp.size}"
            )
        if not np.all(np.isfinite(lp)):
            raise InputError("kernel log-parameters must be finite")
        lp.setflags(write=False)
        object.__setattr__(self, "log_params", lp)
        if self.family != LINEAR:
            ls = np.exp(lp[1:])
            if self.family == SE_ISO:
                ls = np.full(self.input_dim, ls[0])
            object.__setattr__(self, "_inv_ls2", np.ascontiguousarray(1.0 / ls**2))

    @classmethod
    def se_ard(cls, signal_std, lengthscales):
        ls = np.atleast_1d(np.asarray(lengthscales, dtype=float))
        if signal_std <= 0 or np.any(ls <= 0):
            raise InputError("kernel parameters must be strictly positive")
        return cls(SE_ARD, ls.size, np.log(np.concatenate([[signal_std], ls])))

    @classmethod
    def se_iso(cls, signal_std, lengthscale, input_dim):
        if signal_std <= 0 or lengthscale <= 0:
            raise InputError("kernel parameters must be strictly positive")
        return cls(SE_ISO, input_dim, np.log([signal_std, lengthscale]))

    @classmethod
    def linear(cls, input_dim):
        return cls(LINEAR, input_dim)

    def with_log_params(self, log_params):
        return KernelSpec(self.family, self.input_dim, log_params)

    @property
    def signal_var(self):
        if self.family == LINEAR:
            return None
        return float(np.exp(2.0 * self.log_params[0]))

    @property
    def lengthscales(self):
        if self.family == LINEAR:
            return None
        return 1.0 / np.sqrt(self._inv_ls2)

    @property
    def k_max(self):
        """Supremum of the kernel over all input pairs."""
        if self.family == LINEAR:
            raise UnboundedKernel("the linear kernel is unbounded")
        return self.signal_var

    def to_dict(self):
        return {"family": self.family, "log_params": [float(v) for v in self.log_params]}


@dataclass(frozen=True)
class MeanSpec:
    family: str = "zero"
    c: float = 0.0

    def __post_init__(self):
        if self.family not in ("zero", "constant"):
            raise InputError(f"unknown mean family {self.family!r}")
        if not np.isfinite(self.c):
            raise InputError("constant mean must be finite")
        if self.family == "zero" and self.c != 0.0:
            raise InputError("zero mean takes no constant")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, c):
        return cls("constant", float(c))

    @property
    def bound(self):
        return abs(self.c)

    def to_dict(self):
        if self.family == "zero":
            return {"family": "zero"}
        return {"family": "constant", "c": self.c}


def _check_point(spec, a):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (spec.input_dim,):
        raise DimensionMismatch(
            f"kernel expects {spec.input_dim}-dim inputs, got shape {a.shape}"
        )
    return a


def _check_rows(spec, A):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2 or A.shape[1] != spec.input_dim:
        raise DimensionMismatch(
            f"kernel expects {spec.input_dim}-dim inputs, got rows of shape {A.shape}"
        )
    return np.ascontiguousarray(A)


def cross_rows(spec, A, B):
    """Kernel matrix between the rows of ``A`` and the rows of ``B``."""
    A = _check_rows(spec, A)
    B = _check_rows(spec, B)
    if spec.family == LINEAR:
        return A @ B.T
    return _backend.impl.se_cross(A, B, spec.signal_var, spec._inv_ls2)


def sym_rows(spec, A):
    """Symmetric kernel matrix of the rows of ``A`` with themselves."""
    A = _check_rows(spec, A)
    if spec.family == LINEAR:
        K = A @ A.T
        return 0.5 * (K + K.T)
    return _backend.impl.se_sym(A, spec.signal_var, spec._inv_ls2)


def diag_rows(spec, A):
    """``k(a, a)`` for every row ``a`` of ``A``."""
    A = _check_rows(spec, A)
    if spec.family == LINEAR:
        return np.einsum("ij,ij->i", A, A)
    return np.full(A.shape[0], spec.signal_var)


def kernel_eval(spec, a, b):
    a = _check_point(spec, a)
    b = _check_point(spec, b)
    if spec.family == LINEAR:
        return float(a @ b)
    d = a - b
    return spec.signal_var * float(np.exp(-np.sum(d * d * spec._inv_ls2)))


def gram(spec, A, B=None):
    """Gram matrix of column sets: entry ``(j, l) = k(A[:, j], B[:, l])``.

    With ``B`` omitted the result is the symmetric Gram matrix of ``A``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatch("column set must be a 2-D array")
    if B is None:
        return sym_rows(spec, A.T)
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise DimensionMismatch("column set must be a 2-D array")
    return cross_rows(spec, A.T, B.T)


def mean_eval(spec, a):
    return 0.0 if spec.family == "zero" else spec.c


def mean_rows(spec, A):
    """Mean function stacked over the rows of ``A``."""
    n = np.asarray(A).shape[0] if np.ndim(A) == 2 else 1
    return np.full(n, mean_eval(spec, None))


def kernel_grad_hyper(spec, a, b):
    """Gradient of ``k(a, b)`` with respect to the log-parameters."""
    a = _check_point(spec, a)
    b = _check_point(spec, b)
    if spec.family == LINEAR:
        return np.zeros(0)
    k = kernel_eval(spec, a, b)
    scaled = (a - b) ** 2 * spec._inv_ls2
    if spec.family == SE_ARD:
        return np.concatenate([[2.0 * k], 2.0 * k * scaled])
    return np.array([2.0 * k, 2.0 * k * scaled.sum()])


def gram_grad_rows(spec, A):
    """Kernel matrix of the rows of ``A`` plus its derivatives per log-parameter.

    Returns ``(K, [dK/dtheta_0, ...])``.
    """
    A = _check_rows(spec, A)
    K = sym_rows(spec, A)
    if spec.family == LINEAR:
        return K, []
    sq = _backend.impl.sq_diff_per_dim(A, A)
    scaled = sq * spec._inv_ls2[:, None, None]
    grads = [2.0 * K]
    if spec.family == SE_ARD:
        grads.extend(2.0 * K * scaled[d] for d in range(spec.input_dim))
    else:
        grads.append(2.0 * K * scaled.sum(axis=0))
    return K, grads
