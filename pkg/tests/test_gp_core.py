import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from approxgpdm import gp_core, kernels
from approxgpdm.exceptions import DimensionMismatch, InputError, NumericalBreakdown
from approxgpdm.gp_core import TrainingSet, clamp_variance, fit_hyperparameters, log_marginal_likelihood, posterior
from approxgpdm.kernels import KernelSpec, MeanSpec


def _dense_posterior(X, Y, noise, k, z):
    K = kernels.gram(k, X) + noise * np.eye(X.shape[1])
    kz = kernels.gram(k, X, z[:, None])[:, 0]
    Kinv = np.linalg.inv(K)
    return kz @ Kinv @ Y, kernels.kernel_eval(k, z, z) - kz @ Kinv @ kz


def test_training_set_validation():
    with pytest.raises(DimensionMismatch):
        TrainingSet(np.zeros((2, 3)), np.zeros((4, 1)), 0.1)
    with pytest.raises(InputError):
        TrainingSet(np.array([[np.nan]]), np.zeros((1, 1)), 0.1)
    with pytest.raises(InputError):
        TrainingSet(np.zeros((1, 1)), np.zeros((1, 1)), -0.1)
    with pytest.raises(InputError):
        TrainingSet(np.zeros((1, 0)), np.zeros((0, 1)), 0.1)
    ds = TrainingSet([0.0, 1.0], [1.0, 2.0], 0.1)
    assert (ds.input_dim, ds.n_points, ds.output_dim) == (1, 2, 1)


def test_single_point_posterior_closed_form():
    # one point at 0, target 1, unit SE kernel and unit noise: mean 1/2, var 1/2 at z=0
    ds = TrainingSet([[0.0]], [[1.0]], 1.0)
    post = posterior(ds, KernelSpec.se_ard(1.0, [1.0]), MeanSpec.zero(), [0.0])
    assert post.mean[0] == pytest.approx(0.5, rel=1e-14)
    assert post.var[0] == pytest.approx(0.5, rel=1e-14)


def test_far_away_reverts_to_prior():
    ds = TrainingSet([[0.0]], [[1.0]], 0.01)
    post = posterior(ds, KernelSpec.se_ard(2.0, [1.0]), MeanSpec.constant(0.3), [100.0])
    assert post.mean[0] == pytest.approx(0.3)
    assert post.var[0] == pytest.approx(4.0)


def test_posterior_matches_dense_inverse(rng):
    X = rng.uniform(-2, 2, (2, 15))
    Y = rng.standard_normal((15, 3))
    k = KernelSpec.se_ard(1.3, [0.7, 1.1])
    z = rng.uniform(-2, 2, 2)
    post = posterior(TrainingSet(X, Y, 0.05), k, MeanSpec.zero(), z)
    mu, var = _dense_posterior(X, Y, 0.05, k, z)
    np.testing.assert_allclose(post.mean, mu, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(post.var, var, rtol=1e-9, atol=1e-14)
    assert post.var.shape == (3,) and np.all(post.var == post.var[0])


def test_posterior_wrong_input_dim():
    ds = TrainingSet(np.zeros((2, 3)), np.zeros((3, 1)), 0.1)
    with pytest.raises(DimensionMismatch):
        posterior(ds, KernelSpec.se_ard(1.0, [1.0, 1.0]), MeanSpec.zero(), [0.0])


def test_clamp_variance():
    np.testing.assert_array_equal(clamp_variance([-1e-12, 0.5], 1.0), [0.0, 0.5])
    with pytest.raises(NumericalBreakdown):
        clamp_variance([-1e-3], 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_variance_nonincreasing_when_points_added(n, seed):
    r = np.random.default_rng(seed)
    X = r.uniform(-2, 2, (1, n))
    Y = r.standard_normal(n)
    k = KernelSpec.se_ard(1.0, [float(r.uniform(0.3, 2))])
    z = r.uniform(-2, 2, 1)
    v_small = posterior(TrainingSet(X[:, :-1], Y[:-1], 0.01), k, MeanSpec.zero(), z).var[0]
    v_big = posterior(TrainingSet(X, Y, 0.01), k, MeanSpec.zero(), z).var[0]
    assert v_big <= v_small + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_posterior_permutation_invariant(n, seed):
    r = np.random.default_rng(seed)
    X = r.uniform(-2, 2, (2, n))
    Y = r.standard_normal((n, 2))
    k = KernelSpec.se_ard(1.0, [0.8, 1.5])
    z = r.uniform(-2, 2, 2)
    perm = r.permutation(n)
    a = posterior(TrainingSet(X, Y, 0.1), k, MeanSpec.zero(), z)
    b = posterior(TrainingSet(X[:, perm], Y[perm], 0.1), k, MeanSpec.zero(), z)
    np.testing.assert_allclose(a.mean, b.mean, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(a.var, b.var, rtol=1e-9, atol=1e-12)


def test_log_likelihood_scalar_closed_form():
    # one point, k(x,x)=s2: y ~ N(0, s2 + sigma2)
    s2, n2, y = 1.7, 0.3, 0.9
    ds = TrainingSet([[0.4]], [[y]], n2)
    val, _ = log_marginal_likelihood(ds, KernelSpec.se_ard(np.sqrt(s2), [1.0]), MeanSpec.zero())
    v = s2 + n2
    assert val == pytest.approx(-0.5 * y * y / v - 0.5 * np.log(v) - 0.5 * np.log(2 * np.pi), rel=1e-13)


def test_log_likelihood_sums_over_outputs(rng):
    X = rng.uniform(-1, 1, (1, 6))
    Y = rng.standard_normal((6, 2))
    k = KernelSpec.se_ard(1.0, [0.5])
    both, _ = log_marginal_likelihood(TrainingSet(X, Y, 0.1), k, MeanSpec.zero())
    a, _ = log_marginal_likelihood(TrainingSet(X, Y[:, 0], 0.1), k, MeanSpec.zero())
    b, _ = log_marginal_likelihood(TrainingSet(X, Y[:, 1], 0.1), k, MeanSpec.zero())
    assert both == pytest.approx(a + b, rel=1e-13)


@pytest.mark.parametrize("family", ["se_ard", "se_iso"])
def test_log_likelihood_gradient_central_differences(family, rng):
    X = rng.uniform(-2, 2, (3, 12))
    Y = rng.standard_normal((12, 2))
    theta = rng.uniform(-0.5, 0.5, kernels.n_params(family, 3) + 1)

    def f(th):
        ds = TrainingSet(X, Y, np.exp(th[-1]))
        return log_marginal_likelihood(ds, KernelSpec(family, 3, th[:-1]), MeanSpec.constant(0.2))

    _, g = f(theta)
    h = 1e-5
    fd = np.array([(f(theta + h * e)[0] - f(theta - h * e)[0]) / (2 * h) for e in np.eye(theta.size)])
    assert np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-8) <= 1e-6


def _generative_sample(seed, n=200):
    r = np.random.default_rng(seed)
    x = r.uniform(-3, 3, n)
    k = KernelSpec.se_ard(1.0, [0.5])
    K = kernels.gram(k, x[None, :]) + 1e-10 * np.eye(n)
    f = np.linalg.cholesky(K) @ r.standard_normal(n)
    return TrainingSet(x[None, :], f + 0.1 * r.standard_normal(n), 1.0)


def test_fit_recovers_noise_level():
    ds = _generative_sample(0)
    hp = fit_hyperparameters(ds, "se_ard", MeanSpec.zero(), restarts=5, seed=0)
    sigma_n = np.sqrt(hp.noise_var)
    assert 0.05 <= sigma_n <= 0.2
    assert hp.improved


def test_fit_is_deterministic_in_seed():
    ds = _generative_sample(1, n=40)
    a = fit_hyperparameters(ds, "se_ard", MeanSpec.zero(), restarts=3, seed=4)
    b = fit_hyperparameters(ds, "se_ard", MeanSpec.zero(), restarts=3, seed=4)
    np.testing.assert_array_equal(a.log_params, b.log_params)
    assert a.log_noise_var == b.log_noise_var


def test_fit_keeps_fixed_noise():
    ds = _generative_sample(2, n=30).with_noise(0.02)
    hp = fit_hyperparameters(ds, "se_ard", MeanSpec.zero(), restarts=2, seed=0, fit_noise=False)
    assert hp.noise_var == pytest.approx(0.02, rel=1e-14)
    assert hp.training_set(ds).noise_var == pytest.approx(0.02)


def test_fit_beats_its_starts():
    ds = _generative_sample(3, n=40)
    hp = fit_hyperparameters(ds, "se_ard", MeanSpec.zero(), restarts=2, seed=0)
    val, _ = log_marginal_likelihood(hp.training_set(ds), hp.kernel(), MeanSpec.zero())
    assert val == pytest.approx(hp.log_likelihood, rel=1e-10)
    assert np.all(hp.log_params >= gp_core.LOG_BOUNDS[0] - 1e-12)


def test_fit_argument_errors():
    ds = TrainingSet([[0.0, 1.0]], [1.0, 2.0], 0.0)
    with pytest.raises(InputError):
        fit_hyperparameters(ds, "se_ard", MeanSpec.zero(), restarts=0)
    with pytest.raises(InputError):
        fit_hyperparameters(ds, "se_ard", MeanSpec.zero(), fit_noise=False)
    with pytest.raises(InputError):
        fit_hyperparameters(ds.with_noise(0.1), "linear", MeanSpec.zero(), fit_noise=False)


def test_fit_quiet_on_well_posed_problem():
    ds = _generative_sample(4, n=30)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fit_hyperparameters(ds, "se_ard", MeanSpec.zero(), restarts=2, seed=0)


def test_fit_warns_when_search_cannot_move(monkeypatch):
    from approxgpdm.exceptions import NoImprovementWarning

    def flat(ds, kernel, mean):
        return -1.0, np.zeros(kernel.log_params.size + 1)

    monkeypatch.setattr(gp_core, "log_marginal_likelihood", flat)
    with pytest.warns(NoImprovementWarning):
        hp = fit_hyperparameters(_generative_sample(5, n=20), "se_ard", MeanSpec.zero(), restarts=2, seed=0)
    assert not hp.improved and hp.log_likelihood == -1.0


def test_fit_fails_when_evidence_never_finite(monkeypatch):
    def broken(*args, **kwargs):
        raise NumericalBreakdown("singular")

    monkeypatch.setattr(gp_core, "log_marginal_likelihood", broken)
    with pytest.raises(NumericalBreakdown):
        fit_hyperparameters(_generative_sample(6, n=10), "se_ard", MeanSpec.zero(), restarts=2)
