import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpopinf.inference import (OperatorPosterior, RegressionBundle,
                               SingularSystem, expand_gamma, op_post,
                               op_post_all, sample_operator_matrix,
                               stack_modes_for_ode, stack_trajectories)
from oracles import gram, normal_equations, random_regression


def test_identity_regression():
    z = np.arange(1.0, 5.0)
    post = op_post(RegressionBundle(np.eye(4), z, np.eye(4)), 0.0)
    np.testing.assert_allclose(post.mean, z, rtol=1e-14)
    np.testing.assert_allclose(post.covariance, np.eye(4), atol=1e-14)


def test_strong_prior_shrinks_to_zero():
    rng = np.random.default_rng(0)
    D, z, Ws, _ = random_regression(rng, 20, 5)
    post = op_post(RegressionBundle(D, z, Ws), 1e8)
    assert np.linalg.norm(post.mean) <= 1e-6 * np.linalg.norm(z)


def test_random_12_by_5_against_oracle():
    rng = np.random.default_rng(42)
    D, z, Ws, _ = random_regression(rng, 12, 5)
    post = op_post(RegressionBundle(D, z, Ws), 0.3)
    mu, S, _ = normal_equations(D, z, Ws, 0.3)
    assert np.linalg.norm(post.mean - mu) <= 1e-8 * np.linalg.norm(mu)
    assert np.linalg.norm(post.covariance - S) <= 1e-8 * np.linalg.norm(S)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_covariance_is_symmetric_positive_definite_inverse(seed):
    D, z, Ws, gamma = random_regression(np.random.default_rng(seed))
    post = op_post(RegressionBundle(D, z, Ws), gamma)
    np.testing.assert_allclose(post.covariance, post.covariance.T, atol=1e-10)
    post.cholesky()
    G = gram(D, Ws, gamma)
    np.testing.assert_allclose(post.covariance @ G, np.eye(D.shape[1]),
                               atol=1e-8)


def test_mean_minimizes_objective():
    rng = np.random.default_rng(3)
    D, z, Ws, gamma = random_regression(rng, 30, 6)
    bundle = RegressionBundle(D, z, Ws)
    post = op_post(bundle, gamma)
    best = bundle.objective(post.mean, gamma)
    for _ in range(20):
        assert bundle.objective(post.mean + 1e-3 * rng.standard_normal(6),
                                gamma) > best


def test_rank_deficient_without_prior_raises():
    D = np.ones((6, 2))
    with pytest.raises(SingularSystem):
        op_post(RegressionBundle(D, np.ones(6), np.eye(6)), 0.0)
    # any positive prior makes the system well posed
    op_post(RegressionBundle(D, np.ones(6), np.eye(6)), 1e-3)


def test_op_post_all_reductions():
    rng = np.random.default_rng(5)
    bundles = [RegressionBundle(*random_regression(rng, 15, 4)[:3])
               for _ in range(3)]
    single = op_post(bundles[0], 0.5)
    (only,) = op_post_all(bundles[:1], [0.5])
    np.testing.assert_array_equal(only.mean, single.mean)
    a, b = op_post_all([bundles[0], bundles[0]], [0.5, 0.5])
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.covariance, b.covariance)
    posts = op_post_all(bundles, [0.5] * 3)
    perm = [2, 0, 1]
    permuted = op_post_all([bundles[i] for i in perm], [0.5] * 3)
    for k, i in enumerate(perm):
        np.testing.assert_array_equal(permuted[k].mean, posts[i].mean)
    with pytest.raises(SingularSystem, match="row 1"):
        op_post_all([bundles[0], RegressionBundle(np.ones((3, 2)), np.ones(3),
                                                  np.eye(3))], [0.5, 0.0])


def test_stack_trajectories():
    rng = np.random.default_rng(7)
    parts = [random_regression(rng, 10 + i, 4)[:3] for i in range(3)]
    one = stack_trajectories(parts[:1])
    np.testing.assert_array_equal(one.data_matrix, parts[0][0])
    np.testing.assert_array_equal(one.z_tilde, parts[0][1])
    stacked = stack_trajectories(parts)
    eta = rng.standard_normal(4)
    total = sum(RegressionBundle(*p).objective(eta, 0.0) for p in parts)
    assert stacked.objective(eta, 0.0) == pytest.approx(total, rel=1e-12)
    W = stacked.w_sqrt
    start = 0
    for _, _, Ws in parts:
        n = Ws.shape[0]
        blk = (W @ W)[start:start + n, start:start + n]
        np.testing.assert_allclose(blk, Ws @ Ws, rtol=1e-12)
        start += n
    assert np.count_nonzero((W @ W)[:10, 10:]) == 0
    with pytest.raises(ValueError):
        stack_trajectories([parts[0], (np.ones((3, 2)), np.ones(3),
                                       np.eye(3))])


def test_stack_modes_for_ode():
    rng = np.random.default_rng(9)
    D, z, Ws, _ = random_regression(rng, 12, 3)
    b = stack_modes_for_ode([(z, Ws)], D)
    np.testing.assert_array_equal(b.data_matrix, D)
    D2 = rng.standard_normal((24, 3))
    zero = stack_modes_for_ode([(np.zeros(12), Ws), (np.zeros(12), Ws)], D2)
    np.testing.assert_allclose(op_post(zero, 0.1).mean, 0, atol=1e-15)
    with pytest.raises(ValueError):
        stack_modes_for_ode([(z, Ws)], D2)


def test_bundle_validation():
    with pytest.raises(ValueError):
        RegressionBundle(np.ones((4, 2)), np.ones(3), np.eye(4))
    with pytest.raises(ValueError):
        RegressionBundle(np.ones((4, 2)), np.ones(4), np.eye(3))
    with pytest.raises(ValueError):
        expand_gamma([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        expand_gamma(-1.0, 3)


def test_degenerate_sampling_returns_mean():
    mu = np.array([1.0, -2.0, 3.0])
    post = OperatorPosterior(mu, 1e-20 * np.eye(3))
    sample = sample_operator_matrix([post, post], rng_seed=4)
    assert sample.shape == (2, 3)
    np.testing.assert_allclose(sample, np.tile(mu, (2, 1)), atol=1e-9)


def test_sampling_moments():
    rng = np.random.default_rng(11)
    d = 4
    A = rng.standard_normal((d, d))
    S = A @ A.T + 0.5 * np.eye(d)
    mu = rng.standard_normal(d)
    X = sample_operator_matrix([OperatorPosterior(mu, S)], 3,
                               n_samples=10**4)[:, 0, :]
    assert np.all(np.abs(X.mean(axis=0) - mu)
                  <= 4 * np.sqrt(np.max(np.diag(S)) / 1e4))
    C = np.cov(X.T)
    assert np.linalg.norm(C - S) <= 0.1 * np.linalg.norm(S)


def test_sampling_is_deterministic():
    post = OperatorPosterior(np.zeros(3), np.eye(3))
    np.testing.assert_array_equal(sample_operator_matrix([post], 8),
                                  sample_operator_matrix([post], 8))
