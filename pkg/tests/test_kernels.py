import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mvml.exceptions import InputError
from mvml.kernels import (KernelConfig, cross_gram, eval_kernel, gram, inverse_features_sigma,
                          mean_distance_sigma, resolve_kernel)


def test_gaussian_self_similarity_is_one():
    assert eval_kernel(KernelConfig("gaussian", 0.7), [1.0, -2.0], [1.0, -2.0]) == 1.0


def test_gaussian_known_value():
    # squared distance 2, sigma 1 -> exp(-1)
    assert eval_kernel(KernelConfig("gaussian", 1.0), [0, 0], [1, 1]) == pytest.approx(np.exp(-1.0))


def test_linear_is_dot_product():
    assert eval_kernel(KernelConfig("linear"), [1, 2, 3], [4, 5, 6]) == 32.0


def test_gamma_round_trip():
    cfg = KernelConfig.from_gamma(0.125)
    assert cfg.sigma == pytest.approx(2.0)
    assert cfg.gamma == pytest.approx(0.125)


def test_bad_family_and_sigma():
    with pytest.raises(InputError):
        KernelConfig("poly")
    with pytest.raises(InputError):
        KernelConfig("gaussian", 0.0)


def test_dimension_mismatch():
    with pytest.raises(InputError):
        eval_kernel(KernelConfig(), [1, 2], [1, 2, 3])


def test_gram_matches_pairwise_loop(rng):
    X = rng.normal(size=(7, 3))
    for cfg in (KernelConfig("gaussian", 1.3), KernelConfig("linear")):
        K = gram(cfg, X)
        ref = np.array([[eval_kernel(cfg, a, b) for b in X] for a in X])
        np.testing.assert_allclose(K, ref, rtol=1e-12, atol=1e-14)
        assert np.array_equal(K, K.T)


def test_cross_gram_matches_loop(rng):
    X, Z = rng.normal(size=(4, 2)), rng.normal(size=(6, 2))
    cfg = KernelConfig("gaussian", 0.9)
    ref = np.array([[eval_kernel(cfg, a, b) for b in Z] for a in X])
    np.testing.assert_allclose(cross_gram(cfg, X, Z), ref, rtol=1e-12)


def test_mean_distance_sigma_brute_force(rng):
    X = rng.normal(size=(9, 4))
    total = sum(np.linalg.norm(a - b) for a in X for b in X)
    assert mean_distance_sigma(X) == pytest.approx(total / 81, rel=1e-12)


def test_mean_distance_sigma_rejects_degenerate():
    with pytest.raises(InputError):
        mean_distance_sigma(np.ones((1, 2)))
    with pytest.raises(InputError):
        mean_distance_sigma(np.ones((5, 2)))


def test_inverse_features_sigma():
    assert inverse_features_sigma(np.zeros((3, 8))) == pytest.approx(2.0)


def test_resolve_kernel_policies(rng):
    X = rng.normal(size=(5, 2))
    assert resolve_kernel("gaussian", "mean_distance", X).sigma == pytest.approx(mean_distance_sigma(X))
    assert resolve_kernel("gaussian", "inverse_features", X).sigma == pytest.approx(1.0)
    assert resolve_kernel("gaussian", 0.3, X).sigma == 0.3
    assert resolve_kernel("linear", None, X).family == "linear"


points = arrays(np.float64, st.tuples(st.integers(2, 8), st.integers(1, 3)),
                elements=st.floats(-5, 5, allow_nan=False, allow_subnormal=False))


@settings(max_examples=60, deadline=None)
@given(points, st.floats(0.1, 5.0))
def test_gaussian_gram_is_psd(X, sigma):
    K = gram(KernelConfig("gaussian", sigma), X)
    assert np.all(np.diag(K) == 1.0)
    assert np.linalg.eigvalsh(K).min() >= -1e-8 * K.shape[0]


@settings(max_examples=40, deadline=None)
@given(points, st.randoms(use_true_random=False))
def test_gram_permutation_equivariant(X, rnd):
    perm = list(range(X.shape[0]))
    rnd.shuffle(perm)
    cfg = KernelConfig("gaussian", 1.0)
    np.testing.assert_allclose(gram(cfg, X[perm]), gram(cfg, X)[np.ix_(perm, perm)], atol=1e-12)
