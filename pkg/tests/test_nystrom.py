import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvml.exceptions import InputError, NumericalError
from mvml.kernels import KernelConfig, cross_gram, gram
from mvml.linalg import pinv_sqrt
from mvml.multiview import GramStack
from mvml.nystrom import (build_U, factorize_view, landmark_count, nystrom_from_grams,
                          nystrom_from_views, test_factor as nystrom_test_factor)

from conftest import random_psd


def test_pinv_sqrt_examples(rng):
    np.testing.assert_allclose(pinv_sqrt(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(pinv_sqrt(np.diag([4.0, 0.0])), np.diag([0.5, 0.0]))
    W = random_psd(rng, 4, rank=3)
    R = pinv_sqrt(W)
    # R R W is the projector onto range(W)
    vals, vecs = np.linalg.eigh(W)
    V = vecs[:, vals > 1e-10 * vals.max()]
    np.testing.assert_allclose(R @ R @ W, V @ V.T, atol=1e-8)
    np.testing.assert_allclose(R @ R, np.linalg.pinv(W, rcond=1e-10, hermitian=True), rtol=1e-6, atol=1e-8)


def test_pinv_sqrt_rejects_indefinite():
    with pytest.raises(NumericalError, match="-1"):
        pinv_sqrt(np.diag([1.0, -1.0]))


def test_landmark_count():
    assert landmark_count(1.0, 10) == 10
    assert landmark_count(0.25, 10) == 3
    assert landmark_count(0.01, 10) == 1
    with pytest.raises(InputError):
        landmark_count(0.0, 10)


def test_full_nystrom_is_exact(rng):
    K = random_psd(rng, 6)
    U, _ = factorize_view(K, np.arange(6)[::-1])
    np.testing.assert_allclose(U @ U.T, K, rtol=1e-8, atol=1e-8 * np.abs(K).max())


def test_rank_one_reconstruction(rng):
    vec = rng.normal(size=5)
    K = np.outer(vec, vec)
    U, _ = factorize_view(K, [2])
    np.testing.assert_allclose(U @ U.T, K, atol=1e-12)


def test_identity_reconstruction():
    U, _ = factorize_view(np.eye(5), [1, 3])
    expected = np.zeros((5, 5))
    expected[1, 1] = expected[3, 3] = 1.0
    np.testing.assert_allclose(U @ U.T, expected)


def test_duplicate_anchors_rejected():
    with pytest.raises(InputError):
        factorize_view(np.eye(4), [1, 1])


def test_shared_anchors_and_determinism(rng):
    views = [rng.normal(size=(12, 2)), rng.normal(size=(12, 3))]
    cfgs = [KernelConfig("gaussian", 1.0)] * 2
    a = nystrom_from_views(views, cfgs, 5, seed=3)
    b = nystrom_from_views(views, cfgs, 5, seed=3)
    assert a.p == 5 and a.v == 2
    np.testing.assert_array_equal(a.anchor_indices, b.anchor_indices)
    for Ua, Ub in zip(a.U, b.U):
        assert np.array_equal(Ua, Ub)
    H = GramStack(tuple(gram(c, X) for c, X in zip(cfgs, views)))
    c = nystrom_from_grams(H, 5, seed=3)
    np.testing.assert_array_equal(c.anchor_indices, a.anchor_indices)
    for Ua, Uc in zip(a.U, c.U):
        np.testing.assert_allclose(Ua, Uc, atol=1e-12)


def test_build_U_block_structure(rng):
    H = GramStack((random_psd(rng, 5), random_psd(rng, 5)))
    F = nystrom_from_grams(H, 5, seed=0)
    U = build_U(F).dense()
    assert U.shape == (10, 10)
    np.testing.assert_allclose(U[:5, :5], F.U[0])
    assert np.all(U[:5, 5:] == 0.0)
    # p = n, A = I: U U^T U U^T = blockdiag(K_1^2, K_2^2)
    UU = U @ U.T
    np.testing.assert_allclose(UU @ UU, np.block([[H.blocks[0] @ H.blocks[0], np.zeros((5, 5))],
                                                  [np.zeros((5, 5)), H.blocks[1] @ H.blocks[1]]]),
                               rtol=1e-7, atol=1e-7)


def test_compressed_metric_reproduces_anchor_block(rng):
    n, p = 5, 3
    H = GramStack((random_psd(rng, n), random_psd(rng, n)))
    F = nystrom_from_grams(H, p, seed=1)
    U = build_U(F).dense()
    A = random_psd(rng, 2 * n)
    At = U.T @ A @ U
    approx = U @ At @ U.T
    exact = np.block([[H.blocks[l] @ A[l * n:(l + 1) * n, m * n:(m + 1) * n] @ H.blocks[m]
                       for m in range(2)] for l in range(2)])
    # U_l U_l^T agrees with K_l on anchor rows, so anchor rows of both sides agree
    rows = np.concatenate([F.anchor_indices, n + F.anchor_indices])
    P = U @ U.T
    Hd = np.block([[H.blocks[0], np.zeros((n, n))], [np.zeros((n, n)), H.blocks[1]]])
    np.testing.assert_allclose(P[rows], Hd[rows], atol=1e-8)
    np.testing.assert_allclose(approx[np.ix_(rows, rows)],
                               (P @ A @ P)[np.ix_(rows, rows)], atol=1e-8)
    assert approx.shape == exact.shape


def test_test_factor_examples(rng):
    X = rng.normal(size=(6, 2))
    cfg = KernelConfig("gaussian", 1.1)
    K = gram(cfg, X)
    anchors = np.arange(6)
    U, R = factorize_view(K, anchors)
    T = nystrom_test_factor(cfg, X, X[anchors], R)
    np.testing.assert_allclose(T @ U.T, K, atol=1e-8)
    row = cross_gram(cfg, X[[2]], X[anchors])
    assert row[0, 2] == 1.0


def test_test_factor_dense_oracle(rng):
    X, Z = rng.normal(size=(8, 2)), rng.normal(size=(3, 2))
    cfg = KernelConfig("gaussian", 0.8)
    K = gram(cfg, X)
    anchors = np.array([6, 1, 3, 4])
    U, R = factorize_view(K, anchors)
    Qt = cross_gram(cfg, Z, X[anchors])
    W = K[np.ix_(anchors, anchors)]
    oracle = Qt @ np.linalg.pinv(W, rcond=1e-10, hermitian=True) @ K[:, anchors].T
    np.testing.assert_allclose(nystrom_test_factor(cfg, Z, X[anchors], R) @ U.T, oracle,
                               rtol=1e-6, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 9), st.integers(0, 2**32 - 1))
def test_nested_anchors_error_non_increasing(n, seed):
    rng = np.random.default_rng(seed)
    K = random_psd(rng, n, rank=max(1, n - 1))
    order = rng.permutation(n)
    errs = []
    for p in range(1, n + 1):
        U, _ = factorize_view(K, order[:p])
        errs.append(np.linalg.norm(K - U @ U.T))
        idx = order[:p]
        np.testing.assert_allclose((U @ U.T)[np.ix_(idx, idx)], K[np.ix_(idx, idx)],
                                   atol=1e-8 * np.abs(K).max())
    scale = np.linalg.norm(K)
    assert all(b <= a + 1e-8 * scale for a, b in zip(errs, errs[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_pinv_sqrt_symmetric_psd(n, seed):
    W = random_psd(np.random.default_rng(seed), n)
    R = pinv_sqrt(W)
    assert np.array_equal(R, R.T)
    assert np.linalg.eigvalsh(R).min() >= -1e-10 * max(np.abs(R).max(), 1e-300)
