import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semiparam.core import BasisModel, Dataset
from semiparam.gp import (GaussianProcess, KernelNotPDError, MultiOutputGp, RbfArdKernel,
                          jittered_cholesky, kernel_eval, negative_log_marginal_likelihood, pack)
from semiparam.optim import finite_diff_gradient
from semiparam.parametric import lls_fit


def linear_basis():
    return BasisModel(lambda X: np.stack([X[:, 0], np.ones(len(X))], axis=-1)[:, None, :], 2)


def test_kernel_at_zero_distance():
    assert kernel_eval(RbfArdKernel(2.5, np.array([0.3, 4.0])), [1.0, 2.0], [1.0, 2.0]) == 2.5


def test_kernel_closed_form():
    assert kernel_eval(RbfArdKernel(1.0, np.array([1.0])), [0.0], [np.sqrt(2)]) == \
        pytest.approx(np.exp(-1.0), abs=1e-12)


def test_kernel_long_lengthscale_switches_dimension_off():
    k = RbfArdKernel(1.3, np.array([0.7, 1e8]))
    a = kernel_eval(k, [0.1, 0.0], [0.5, 0.0])
    b = kernel_eval(k, [0.1, -30.0], [0.5, 45.0])
    assert abs(a - b) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_gram_matrix_symmetric_and_pd(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(15, 2))
    K = RbfArdKernel(float(rng.uniform(0.1, 3)), rng.uniform(0.2, 3, 2))(X)
    assert np.allclose(K, K.T)
    jittered_cholesky(K + 1e-8 * np.eye(15))


def test_cholesky_failure_reports_not_pd():
    with pytest.raises(KernelNotPDError, match="not PD"):
        jittered_cholesky(-np.eye(3))


@pytest.mark.parametrize("y", [0.0, 1.7, -0.4])
def test_nlml_single_point_closed_form(y):
    sf2, sn2 = 1.4, 0.3
    p = pack(sf2, [0.8], sn2)
    ev = negative_log_marginal_likelihood(p, np.array([[0.2]]), np.array([[y]]))
    s = sf2 + sn2
    assert ev.value == pytest.approx(0.5 * y * y / s + 0.5 * np.log(2 * np.pi * s), rel=1e-9)  # jitter 1e-10


def _rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_nlml_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, (20, 2))
    Y = np.sin(X[:, :1]) + X[:, 1:] + 0.1 * rng.standard_normal((20, 1))
    b = linear_basis()
    p = np.concatenate([rng.normal(0, 0.5, 1), rng.normal(0, 0.5, 2), rng.normal(-2, 0.5, 1),
                        rng.normal(0, 1, 2)])
    phi = b.features(X)
    ev = negative_log_marginal_likelihood(p, X, Y, phi)
    fd = finite_diff_gradient(lambda q: negative_log_marginal_likelihood(q, X, Y, phi).value, p, 1e-5)
    assert _rel(ev.gradient, fd) < 1e-5


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_nlml_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 2))
    Y = rng.normal(size=(12, 1))
    p = pack(1.2, [0.7, 1.5], 0.2)
    perm = rng.permutation(12)
    a = negative_log_marginal_likelihood(p, X, Y).value
    b = negative_log_marginal_likelihood(p, X[perm], Y[perm]).value
    assert abs(a - b) < 1e-10


def test_spgp_recovers_generator_coefficients():
    rng = np.random.default_rng(0)
    X = rng.uniform(-3, 3, (500, 1))
    theta = np.array([1.5, -0.7])
    Y = 1.5 * X - 0.7 + 0.1 * rng.standard_normal((500, 1))
    gp = GaussianProcess(linear_basis(), mean_init=np.zeros(2)).fit(X, Y)
    assert np.all(np.abs(gp.mean_coefficients - theta) <= 0.02 * np.abs(theta))
    assert 0.005 <= gp.noise_variance <= 0.02


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_pure_noise_is_absorbed_by_noise_variance(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-3, 3, (200, 1))
    Y = rng.standard_normal((200, 1))
    gp = GaussianProcess().fit(X, Y)
    assert 0.5 <= gp.noise_variance / Y.var() <= 1.5


def test_spgp_exact_mean_variance_at_training_inputs():
    X = np.linspace(-2, 2, 30)[:, None]
    Y = 1.5 * X - 0.7
    gp = GaussianProcess(linear_basis(), mean_init=[1.5, -0.7]).fit(X, Y)
    pred = gp.predict(X)
    assert np.all(pred.variance <= gp.noise_variance + gp.kernel.variance)
    assert np.all(pred.variance <= gp.noise_variance + 1e-6 + 1e-3 * gp.kernel.variance)


def test_noiseless_interpolation():
    X = np.linspace(0, 5, 8)[:, None]
    Y = np.sin(X)
    gp = GaussianProcess().set_data(X, Y, pack(1.0, [1.0], 1e-12))
    assert np.max(np.abs(gp.predict(X).mean - Y)) < 1e-5


def test_far_query_reverts_to_mean_function():
    X = np.linspace(0, 1, 10)[:, None]
    Y = 2 * X + 1 + np.sin(5 * X)
    p = pack(0.5, [0.3], 0.01, [2.0, 1.0])
    gp = GaussianProcess(linear_basis()).set_data(X, Y, p)
    xs = np.array([[30.0]])
    pred = gp.predict(xs)
    assert pred.mean[0, 0] == pytest.approx(61.0, abs=1e-6)
    assert pred.variance[0, 0] == pytest.approx(0.51, abs=1e-6)
    zero = GaussianProcess().set_data(X, Y, pack(0.5, [0.3], 0.01))
    assert abs(zero.predict(xs).mean[0, 0]) < 1e-6


def test_variance_positive_and_bounded():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(25, 2))
    gp = GaussianProcess().set_data(X, rng.normal(size=(25, 1)), pack(1.3, [0.5, 0.9], 0.05))
    var = gp.predict(np.vstack([X, rng.normal(size=(50, 2)) * 4])).variance
    assert np.all(var > 0)
    assert np.all(var[:25] <= 1.35 + 1e-12)


def test_frozen_lls_mean_with_vanishing_kernel_matches_parametric():
    rng = np.random.default_rng(4)
    X = rng.uniform(-2, 2, (40, 1))
    Y = 0.8 * X + 0.3 + 0.2 * rng.standard_normal((40, 1))
    b = linear_basis()
    rep = lls_fit(b, Dataset(X, Y))
    gp = GaussianProcess(b).set_data(X, Y, pack(1e-14, [1.0], 0.04, rep.coefficients))
    xs = rng.uniform(-3, 3, (20, 1))
    assert np.max(np.abs(gp.predict(xs).mean - b.predict(xs, rep.coefficients))) < 1e-6


def test_multi_output_single_column_shared_equals_separate():
    rng = np.random.default_rng(5)
    X = rng.uniform(-2, 2, (40, 1))
    Y = np.sin(2 * X) + 0.05 * rng.standard_normal((40, 1))
    a = MultiOutputGp(sharing="shared", max_iters=100).fit(X, Y)
    b = MultiOutputGp(sharing="separate", max_iters=100).fit(X, Y)
    assert np.array_equal(a.predict(X).mean, b.predict(X).mean)


def test_identical_outputs_shared_agrees_with_separate():
    rng = np.random.default_rng(6)
    X = rng.uniform(-2, 2, (40, 1))
    y = np.sin(2 * X) + 0.05 * rng.standard_normal((40, 1))
    Y = np.hstack([y, y])
    a = MultiOutputGp(sharing="shared").fit(X, Y)
    b = MultiOutputGp(sharing="separate").fit(X, Y)
    assert np.max(np.abs(a.predict(X).mean - b.predict(X).mean)) < 1e-3
    assert a.total_nlml == pytest.approx(b.total_nlml, rel=1e-4)


def test_separate_not_worse_than_shared_for_incompatible_outputs():
    rng = np.random.default_rng(7)
    X = rng.uniform(-3, 3, (60, 1))
    Y = np.hstack([np.sin(6 * X), 0.2 * X ** 2]) + 0.05 * rng.standard_normal((60, 2))
    a = MultiOutputGp(sharing="shared").fit(X, Y)
    b = MultiOutputGp(sharing="separate").fit(X, Y)
    assert b.total_nlml <= a.total_nlml + 1e-6


def test_multi_output_rejects_unknown_mode():
    with pytest.raises(ValueError):
        MultiOutputGp(sharing="both")


def test_parameters_positive_after_fit_and_serialization_round_trip():
    rng = np.random.default_rng(8)
    X = rng.uniform(-2, 2, (30, 1))
    Y = 0.5 * X + np.sin(3 * X)
    gp = GaussianProcess(linear_basis(), mean_init=np.zeros(2)).fit(X, Y)
    d = json.loads(gp.to_json())
    assert d["kernel"]["variance"] > 0 and d["noise_variance"] > 0
    assert all(v > 0 for v in d["kernel"]["lengthscales"])
    clone = GaussianProcess(linear_basis()).set_data(X, Y, GaussianProcess.params_from_dict(d))
    xs = rng.uniform(-3, 3, (10, 1))
    assert np.allclose(clone.predict(xs).mean, gp.predict(xs).mean, atol=1e-9)
