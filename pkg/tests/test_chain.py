import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exphmm.chain import ChainParams, forward_backward, path_sum_loglik


def random_chain(rng, K):
    pi = rng.dirichlet(np.ones(K))
    Pi = rng.dirichlet(np.ones(K), size=K)
    return ChainParams(pi, Pi)


def test_chain_validation():
    with pytest.raises(ValueError):
        ChainParams(np.array([0.5, 0.6]), np.eye(2))
    with pytest.raises(ValueError):
        ChainParams(np.array([0.5, 0.5]), np.array([[0.5, 0.4], [0, 1]]))
    with pytest.raises(ValueError):
        ChainParams(np.array([1.0]), np.eye(2))


def test_single_state():
    le = np.random.default_rng(0).normal(size=(7, 1))
    post = forward_backward(le, ChainParams(np.ones(1), np.ones((1, 1))))
    np.testing.assert_allclose(post.gamma, 1.0)
    assert post.loglik == pytest.approx(le.sum(), abs=1e-12)
    assert path_sum_loglik(le, ChainParams(np.ones(1), np.ones((1, 1)))) == pytest.approx(le.sum())


def test_single_time_point_is_bayes_rule():
    le = np.array([[-1.0, -3.0, 0.5]])
    pi = np.array([0.2, 0.5, 0.3])
    post = forward_backward(le, ChainParams(pi, np.full((3, 3), 1 / 3)))
    w = pi * np.exp(le[0])
    np.testing.assert_allclose(post.gamma[0], w / w.sum(), rtol=1e-12)
    assert post.xi.shape == (0, 3, 3)


def test_uniform_emissions():
    rng = np.random.default_rng(3)
    chain = random_chain(rng, 3)
    le = np.full((6, 3), -2.5)
    assert path_sum_loglik(le, chain) == pytest.approx(-15.0, abs=1e-12)
    assert forward_backward(le, chain).loglik == pytest.approx(-15.0, abs=1e-12)


def test_path_sum_T8():
    rng = np.random.default_rng(11)
    chain = random_chain(rng, 2)
    le = rng.normal(size=(8, 2)) * 3
    assert forward_backward(le, chain).loglik == pytest.approx(path_sum_loglik(le, chain), abs=1e-10)


@pytest.mark.parametrize("K", [2, 3])
@pytest.mark.parametrize("T", range(1, 11))
def test_path_sum_sweep(T, K):
    rng = np.random.default_rng(100 * T + K)
    chain = random_chain(rng, K)
    le = rng.normal(size=(T, K)) * 2
    assert forward_backward(le, chain).loglik == pytest.approx(path_sum_loglik(le, chain), abs=1e-10)


def test_path_sum_guard():
    with pytest.raises(ValueError):
        path_sum_loglik(np.zeros((21, 2)), ChainParams(np.ones(2) / 2, np.full((2, 2), 0.5)))


def test_rejects_nonfinite_rows():
    le = np.zeros((4, 2))
    le[2, 1] = np.nan
    with pytest.raises(ValueError, match="t = \\[2\\]"):
        forward_backward(le, ChainParams(np.ones(2) / 2, np.full((2, 2), 0.5)))


def test_zero_transitions_handled():
    chain = ChainParams(np.array([1.0, 0.0]), np.array([[0.5, 0.5], [0.0, 1.0]]))
    le = np.random.default_rng(5).normal(size=(6, 2))
    post = forward_backward(le, chain)
    assert post.gamma[0, 1] == 0.0
    assert post.loglik == pytest.approx(path_sum_loglik(le, chain), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(1, 4), st.integers(0, 10 ** 6))
def test_posterior_invariants(T, K, seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, K)
    le = rng.normal(size=(T, K)) * 5
    post = forward_backward(le, chain)
    np.testing.assert_allclose(post.gamma.sum(1), 1.0, atol=1e-10)
    if T > 1:
        np.testing.assert_allclose(post.xi.sum((1, 2)), 1.0, atol=1e-10)
        np.testing.assert_allclose(post.xi.sum(1), post.gamma[1:], atol=1e-10)
        np.testing.assert_allclose(post.xi.sum(2), post.gamma[:-1], atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10 ** 6), st.floats(-50, 50))
def test_shift_and_permutation(T, seed, c):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, 3)
    le = rng.normal(size=(T, 3))
    base = forward_backward(le, chain)
    shifted = forward_backward(le + c, chain)
    assert shifted.loglik == pytest.approx(base.loglik + T * c, abs=1e-9)
    np.testing.assert_allclose(shifted.gamma, base.gamma, atol=1e-10)
    np.testing.assert_allclose(shifted.xi, base.xi, atol=1e-10)
    order = rng.permutation(3)
    perm = forward_backward(le[:, order], chain.permute(order))
    assert perm.loglik == pytest.approx(base.loglik, abs=1e-9)
    np.testing.assert_allclose(perm.gamma, base.gamma[:, order], atol=1e-10)
