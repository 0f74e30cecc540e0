import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from mvml.exceptions import InputError
from mvml.kernels import KernelConfig, gram
from mvml.multiview import (GramStack, MetricMatrix, assemble_K, build_gram_stack, group_frobenius,
                            group_layout, preset_metric_cov, preset_metric_identity_blocks)

from conftest import random_psd


def test_build_gram_stack_matches_per_view(rng):
    views = [rng.normal(size=(6, 2)), rng.normal(size=(6, 3))]
    cfgs = [KernelConfig("gaussian", 1.0), KernelConfig("linear")]
    H = build_gram_stack(views, cfgs)
    assert (H.n, H.v) == (6, 2)
    for K, cfg, X in zip(H.blocks, cfgs, views):
        np.testing.assert_array_equal(K, gram(cfg, X))


def test_build_gram_stack_single_and_identical_views(rng):
    X = rng.normal(size=(4, 2))
    cfg = KernelConfig("gaussian", 0.5)
    assert build_gram_stack([X], [cfg]).v == 1
    H = build_gram_stack([X, X], [cfg, cfg])
    np.testing.assert_array_equal(H.blocks[0], H.blocks[1])


def test_build_gram_stack_row_mismatch(rng):
    with pytest.raises(InputError):
        build_gram_stack([rng.normal(size=(4, 2)), rng.normal(size=(5, 2))], [KernelConfig()] * 2)


def test_assemble_K_dense_oracle(rng):
    n, v = 3, 2
    H = GramStack(tuple(random_psd(rng, n) for _ in range(v)))
    A = random_psd(rng, n * v)
    Hd = scipy.linalg.block_diag(*H.blocks)
    np.testing.assert_allclose(assemble_K(H, A), Hd @ A @ Hd, rtol=1e-12, atol=1e-12)


def test_assemble_K_identity_metric(rng):
    H = GramStack((random_psd(rng, 3), random_psd(rng, 3)))
    K = assemble_K(H, np.eye(6))
    np.testing.assert_allclose(K, scipy.linalg.block_diag(*(B @ B for B in H.blocks)), atol=1e-12)


def test_assemble_K_dimension_error(rng):
    with pytest.raises(InputError):
        assemble_K(GramStack((np.eye(3),)), np.eye(4))


def test_identity_blocks_preset_full_rank(rng):
    H = GramStack((random_psd(rng, 4) + np.eye(4), np.eye(4)))
    A = preset_metric_identity_blocks(H)
    np.testing.assert_allclose(A.block(1, 1), np.eye(4), atol=1e-12)
    K = assemble_K(H, A)
    np.testing.assert_allclose(K[:4, :4], H.blocks[0], rtol=1e-8)
    assert np.all(K[:4, 4:] == 0.0)


def test_identity_blocks_preset_rank_deficient(rng):
    X = rng.normal(size=(5, 2))
    X[4] = X[0]
    K1 = gram(KernelConfig("gaussian", 1.0), X)
    A = preset_metric_identity_blocks(GramStack((K1,)))
    np.testing.assert_allclose(K1 @ A.block(0, 0) @ K1, K1, atol=1e-8)


def test_cov_preset():
    H = GramStack((np.eye(2),))
    np.testing.assert_allclose(preset_metric_cov(H).entries, 0.5 * np.eye(2))


def test_cov_preset_blocks_and_psd(rng):
    H = GramStack((random_psd(rng, 3), random_psd(rng, 3)))
    A = preset_metric_cov(H)
    assert np.linalg.eigvalsh(A.entries).min() >= -1e-12
    K = assemble_K(H, A)
    np.testing.assert_allclose(K[:3, 3:], H.blocks[0] @ H.blocks[1] / 3, atol=1e-12)


@pytest.mark.parametrize("v,count", [(1, 1), (2, 3), (3, 6), (5, 15)])
def test_group_layout_counts(v, count):
    layout = group_layout(v)
    assert len(layout.groups) == count
    blocks = [b for grp in layout.groups for b in grp]
    assert sorted(blocks) == sorted((l, m) for l in range(v) for m in range(v))


def test_group_layout_rejects_zero():
    with pytest.raises(InputError):
        group_layout(0)


def test_group_frobenius_examples():
    A = MetricMatrix(np.zeros((4, 4)), 2)
    assert group_frobenius(A, ((0, 0),)) == 0.0
    E = np.zeros((4, 4))
    E[:2, :2] = np.eye(2)
    E[:2, 2:] = 1.0
    E[2:, :2] = 1.0
    A = MetricMatrix(E, 2)
    assert group_frobenius(A, ((0, 0),)) == pytest.approx(np.sqrt(2))
    assert group_frobenius(A, ((0, 1), (1, 0))) == pytest.approx(np.sqrt(8))
    with pytest.raises(InputError):
        group_frobenius(A, ((0, 2),))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_assemble_K_symmetric_psd(v, n, seed):
    rng = np.random.default_rng(seed)
    H = GramStack(tuple(random_psd(rng, n) for _ in range(v)))
    A = random_psd(rng, n * v)
    K = assemble_K(H, A)
    scale = max(np.abs(K).max(), 1e-300)
    assert np.abs(K - K.T).max() <= 1e-10 * scale
    vals = np.linalg.eigvalsh(K)
    assert vals.min() >= -1e-8 * max(vals.max(), 1e-300)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_groups_partition_frobenius(v, n, seed):
    rng = np.random.default_rng(seed)
    S = rng.normal(size=(n * v, n * v))
    A = MetricMatrix(S + S.T, v)
    total = sum(group_frobenius(A, grp) ** 2 for grp in A.layout.groups)
    assert total == pytest.approx(np.sum(A.entries ** 2), rel=1e-12)
