"""Pure-numpy versions of the compiled kernel loops in ``_kernels_ext``."""
import numpy as np


def se_cross(A, B, signal_var, inv_ls2):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    scale = np.sqrt(inv_ls2)
    a = A * scale
    b = B * scale
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * a @ b.T
    # expanded form can dip below zero by rounding
    np.maximum(sq, 0.0, out=sq)
    return signal_var * np.exp(-sq)


def se_sym(A, signal_var, inv_ls2):
    K = se_cross(A, A, signal_var, inv_ls2)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, signal_var)
    return K


def sq_diff_per_dim(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    diff = A.T[:, :, None] - B.T[:, None, :]
    return diff * diff
