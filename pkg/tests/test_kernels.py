import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from approxgpdm import _backend, _kernels_py, kernels
from approxgpdm.exceptions import DimensionMismatch, InputError, UnboundedKernel
from approxgpdm.kernels import KernelSpec, MeanSpec


def test_se_same_point_equals_signal_variance():
    k = KernelSpec.se_ard(1.0, [1.0])
    assert kernels.kernel_eval(k, [0.0], [0.0]) == 1.0


def test_se_unit_distance_no_half_factor():
    k = KernelSpec.se_ard(1.0, [1.0])
    assert kernels.kernel_eval(k, [0.0], [1.0]) == pytest.approx(np.exp(-1.0), rel=1e-15)


def test_se_ard_per_dimension_lengthscales():
    k = KernelSpec.se_ard(2.0, [1.0, 2.0])
    # 4 * exp(-(1 + 1/4))
    assert kernels.kernel_eval(k, [0.0, 0.0], [1.0, 1.0]) == pytest.approx(4 * np.exp(-1.25), rel=1e-14)


def test_se_iso_matches_ard_with_equal_lengthscales():
    a = KernelSpec.se_iso(1.5, 0.7, 3)
    b = KernelSpec.se_ard(1.5, [0.7] * 3)
    x, y = np.array([0.1, -0.2, 0.3]), np.array([1.0, 0.5, -1.0])
    assert kernels.kernel_eval(a, x, y) == pytest.approx(kernels.kernel_eval(b, x, y), rel=1e-15)


def test_linear_kernel_is_dot_product():
    k = KernelSpec.linear(2)
    assert kernels.kernel_eval(k, [1.0, 0.0], [-1.0, 0.0]) == -1.0
    with pytest.raises(UnboundedKernel):
        k.k_max


def test_k_max_is_signal_variance():
    assert KernelSpec.se_ard(3.0, [1.0, 1.0]).k_max == pytest.approx(9.0)


def test_dimension_mismatch():
    k = KernelSpec.se_ard(1.0, [1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        kernels.kernel_eval(k, [0.0], [0.0, 1.0])
    with pytest.raises(DimensionMismatch):
        kernels.gram(k, np.zeros((3, 4)))


def test_invalid_parameters():
    with pytest.raises(InputError):
        KernelSpec.se_ard(-1.0, [1.0])
    with pytest.raises(InputError):
        KernelSpec.se_ard(1.0, [0.0])
    with pytest.raises(InputError):
        KernelSpec("se_ard", 2, [0.0, 0.0])
    with pytest.raises(InputError):
        KernelSpec("rbf", 2, [0.0])


def test_gram_columns_convention(rng):
    k = KernelSpec.se_ard(1.2, [0.5, 2.0])
    A = rng.standard_normal((2, 4))
    B = rng.standard_normal((2, 3))
    G = kernels.gram(k, A, B)
    assert G.shape == (4, 3)
    assert G[2, 1] == pytest.approx(kernels.kernel_eval(k, A[:, 2], B[:, 1]), rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_gram_symmetric_psd(n, d, seed):
    r = np.random.default_rng(seed)
    k = KernelSpec.se_ard(float(r.uniform(0.2, 3)), r.uniform(0.2, 3, d))
    X = r.uniform(-3, 3, (d, n))
    K = kernels.gram(k, X)
    np.testing.assert_array_equal(K, K.T)
    assert np.linalg.eigvalsh(K).min() >= -1e-10 * k.signal_var
    np.testing.assert_allclose(np.diag(K), k.signal_var)


def test_gram_single_point():
    k = KernelSpec.se_ard(2.0, [1.0])
    np.testing.assert_allclose(kernels.gram(k, np.array([[0.3]])), [[4.0]])


def test_gram_duplicate_columns_rank_deficient():
    k = KernelSpec.se_ard(1.0, [1.0])
    K = kernels.gram(k, np.array([[0.3, 0.3, 1.0]]))
    assert np.linalg.matrix_rank(K) == 2


def test_kernel_grad_matches_finite_differences(rng):
    for family in ("se_ard", "se_iso"):
        k = KernelSpec(family, 3, rng.uniform(-0.5, 0.5, kernels.n_params(family, 3)))
        a, b = rng.standard_normal(3), rng.standard_normal(3)
        g = kernels.kernel_grad_hyper(k, a, b)
        h = 1e-6
        for i in range(k.log_params.size):
            up, dn = k.log_params.copy(), k.log_params.copy()
            up[i] += h
            dn[i] -= h
            fd = (kernels.kernel_eval(k.with_log_params(up), a, b)
                  - kernels.kernel_eval(k.with_log_params(dn), a, b)) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-7, abs=1e-12)


def test_gram_grad_rows_consistent_with_pointwise(rng):
    k = KernelSpec.se_ard(1.1, [0.8, 1.7])
    A = rng.standard_normal((5, 2))
    K, dK = kernels.gram_grad_rows(k, A)
    for i in range(3):
        assert dK[i][1, 3] == pytest.approx(kernels.kernel_grad_hyper(k, A[1], A[3])[i], rel=1e-12)


def test_mean_specs():
    assert kernels.mean_eval(MeanSpec.zero(), [1.0]) == 0.0
    assert kernels.mean_eval(MeanSpec.constant(2.5), [1.0]) == 2.5
    assert MeanSpec.constant(-3.0).bound == 3.0
    with pytest.raises(InputError):
        MeanSpec("zero", 1.0)
    with pytest.raises(InputError):
        MeanSpec("linear")


@pytest.mark.skipif("compiled" not in _backend.available_backends(), reason="extension not built")
@pytest.mark.parametrize("na,nb,d", [(1, 1, 1), (7, 3, 2), (40, 25, 5)])
def test_backend_parity(na, nb, d, rng):
    from approxgpdm import _kernels_ext

    A = rng.uniform(-3, 3, (na, d))
    B = rng.uniform(-3, 3, (nb, d))
    inv = rng.uniform(0.1, 4.0, d)
    np.testing.assert_allclose(_kernels_ext.se_cross(A, B, 1.7, inv), _kernels_py.se_cross(A, B, 1.7, inv),
                               rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(_kernels_ext.se_sym(A, 1.7, inv), _kernels_py.se_sym(A, 1.7, inv),
                               rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(_kernels_ext.sq_diff_per_dim(A, B), _kernels_py.sq_diff_per_dim(A, B),
                               rtol=1e-12, atol=1e-13)


def test_set_backend_roundtrip():
    before = _backend.BACKEND
    prev = _backend.set_backend("python")
    assert prev == before and _backend.BACKEND == "python"
    k = KernelSpec.se_ard(1.0, [1.0])
    assert kernels.kernel_eval(k, [0.0], [1.0]) == pytest.approx(np.exp(-1.0))
    _backend.set_backend(before)
    with pytest.raises(ValueError):
        _backend.set_backend("fortran")
