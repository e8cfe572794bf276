"""Linear-algebra and probability primitives shared by the other modules."""
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import roots_hermite, roots_legendre

from .exceptions import DimensionMismatch, NoConvergence, NonFinite

JITTER_LEVELS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
SYMMETRY_RTOL = 1e-12


def _require_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFinite("input contains NaN or infinite entries")


def _as_2d(B):
    B = np.asarray(B, dtype=float)
    return (B[:, None], True) if B.ndim == 1 else (B, False)


def check_symmetric(A, rtol=SYMMETRY_RTOL):
    """Validate ``A`` as a finite symmetric matrix and return it as float array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    _require_finite(A)
    scale = max(np.max(np.abs(A), initial=0.0), np.finfo(float).tiny)
    if np.max(np.abs(A - A.T), initial=0.0) > rtol * scale:
        raise DimensionMismatch("matrix is not symmetric")
    return A


class PDFactor:
    """Factorization of a symmetric positive (semi-)definite matrix.

    Tries a plain Cholesky first, then Cholesky with diagonal jitter
    ``eps * trace(A) / dim`` for ``eps`` in :data:`JITTER_LEVELS`, and finally a
    Moore-Penrose pseudo-inverse.

    Attributes
    ----------
    method : str
        ``"cholesky"`` or ``"pinv"``.
    jitter : float
        Diagonal value that was added before a successful Cholesky (0 if none).
    """

    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
        _require_finite(A)
        self.dim = A.shape[0]
        self.jitter = 0.0
        self._pinv = None
        self.L = self._try_cholesky(A)
        if self.L is not None:
            self.method = "cholesky"
            return
        scale = np.trace(A) / self.dim if self.dim else 1.0
        if not scale > 0.0:
            scale = 1.0
        for eps in JITTER_LEVELS:
            jitter = eps * scale
            L = self._try_cholesky(A + jitter * np.eye(self.dim))
            if L is not None:
                self.L = L
                self.jitter = jitter
                self.method = "cholesky"
                return
        self.method = "pinv"
        self._pinv = _pinv_parts(A)

    @staticmethod
    def _try_cholesky(A):
        try:
            L = linalg.cholesky(A, lower=True, check_finite=False)
        except linalg.LinAlgError:
            return None
        # LAPACK accepts tiny positive pivots that still blow up the solve
        if not np.all(np.isfinite(L)) or np.any(np.diag(L) <= 0.0):
            return None
        return L

    def solve(self, B):
        B2, flat = _as_2d(B)
        if B2.shape[0] != self.dim:
            raise DimensionMismatch(
                f"right-hand side has {B2.shape[0]} rows, matrix has dim {self.dim}"
            )
        _require_finite(B2)
        if self.method == "cholesky":
            X = linalg.cho_solve((self.L, True), B2, check_finite=False)
        else:
            X = _pinv_apply(self._pinv, B2)
        return X[:, 0] if flat else X

    def half_solve(self, B):
        """Return ``L^{-1} B`` for the Cholesky factor ``L`` (Cholesky path only)."""
        if self.method != "cholesky":
            raise NotImplementedError("half_solve needs a Cholesky factor")
        return linalg.solve_triangular(self.L, B, lower=True, check_finite=False)

    @property
    def logdet(self):
        if self.method != "cholesky":
            return None
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))

    def inverse(self):
        return self.solve(np.eye(self.dim))


def factor_pd(A):
    return PDFactor(A)


def _pinv_parts(A):
    U, s, Vt = linalg.svd(A, full_matrices=False, check_finite=False)
    smax = s[0] if s.size else 0.0
    tol = max(A.shape) * np.finfo(float).eps * smax
    keep = s > tol
    return U[:, keep], s[keep], Vt[keep]


def _pinv_apply(parts, B):
    U, s, Vt = parts
    return Vt.T @ ((U.T @ B) / s[:, None])


def chol_solve_pd(A, B):
    """Solve ``A X = B`` for symmetric positive-definite ``A``.

    Falls back to diagonal jitter and then to :func:`pseudo_inverse_solve` if the
    Cholesky factorization fails.
    """
    A = np.asarray(A, dtype=float)
    B2, _ = _as_2d(B)
    _require_finite(A, B2)
    return factor_pd(A).solve(B)


def pseudo_inverse_solve(A, B):
    """Minimum-norm least-squares solution of ``A X = B``.

    Singular values below ``dim * eps * s_max`` are discarded.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    B2, flat = _as_2d(B)
    if B2.shape[0] != A.shape[0]:
        raise DimensionMismatch("row count of B must equal the matrix dimension")
    _require_finite(A, B2)
    X = _pinv_apply(_pinv_parts(A), B2)
    return X[:, 0] if flat else X


@dataclass(frozen=True, eq=False)
class DiagGaussian:
    """Gaussian with independent coordinates: ``mean`` and per-coordinate ``var``."""

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        var = np.atleast_1d(np.asarray(self.var, dtype=float))
        if mean.shape != var.shape or mean.ndim != 1:
            raise DimensionMismatch(
                f"mean shape {mean.shape} and var shape {var.shape} must match"
            )
        _require_finite(mean, var)
        if np.any(var < 0.0):
            raise ValueError("variances must be nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @property
    def dim(self):
        return self.mean.shape[0]

    @property
    def trace(self):
        return float(self.var.sum())


def mvn_sample(d, rng):
    """Draw ``mean + sqrt(var) * z`` with ``z`` standard normal from ``rng``.

    Always consumes exactly ``d.dim`` normals so that streams stay aligned
    between models; zero-variance coordinates return the mean exactly.
    """
    z = rng.standard_normal(d.dim)
    return d.mean + np.sqrt(d.var) * z


def abs_moment_quadrature(p, c1, c2, nodes=64, rtol=1e-10, max_nodes=1024):
    """``E|Z|^p`` for ``Z ~ N(c1, 1/c2)`` by adaptive Gaussian quadrature.

    Even ``p`` is a polynomial moment and Gauss-Hermite is exact. For odd ``p``
    the kink of ``|z|^p`` at zero ruins Gauss-Hermite convergence, so the
    polynomial moment is corrected by the negative half-line, which is smooth
    and integrated with Gauss-Legendre over a 40-sigma window. The node count
    doubles from ``nodes`` until successive estimates agree to ``rtol``.
    """
    p = int(p)
    if p < 1:
        raise ValueError("p must be a positive integer")
    if not c2 > 0.0:
        raise ValueError("c2 must be positive")
    if not np.isfinite(c1):
        raise NonFinite("c1 must be finite")
    sigma = 1.0 / np.sqrt(c2)

    def estimate(n):
        x, w = roots_hermite(n)
        z = c1 + np.sqrt(2.0) * sigma * x
        total = float(np.dot(w, z**p)) / np.sqrt(np.pi)
        if p % 2 == 0:
            return total
        lo = c1 - 40.0 * sigma
        hi = min(0.0, c1 + 40.0 * sigma)
        if lo >= hi:
            return total
        t, v = roots_legendre(n)
        half = 0.5 * (hi - lo)
        zz = half * t + 0.5 * (hi + lo)
        dens = np.exp(-0.5 * ((zz - c1) / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))
        negative_part = half * float(np.dot(v, zz**p * dens))
        return total - 2.0 * negative_part

    n = int(nodes)
    prev = estimate(n)
    while n < max_nodes:
        n *= 2
        cur = estimate(n)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise NoConvergence(f"quadrature did not settle within {max_nodes} nodes")
