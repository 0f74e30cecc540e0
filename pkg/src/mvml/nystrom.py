"""Block-wise Nystrom factorization ``K_l ~ U_l U_l^T`` with anchors shared by all views."""
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError
from .kernels import cross_gram
from .linalg import PINV_RTOL, pinv_sqrt
from .multiview import GramStack


def landmark_count(fraction, n):
    """Resolve an approximation level (fraction of n) to a landmark count."""
    if not 0.0 < fraction <= 1.0:
        raise InputError(f"approximation fraction must lie in (0, 1], got {fraction!r}")
    return max(1, int(np.floor(fraction * n + 0.5)))


def anchor_permutation(n, seed):
    return np.random.default_rng(seed).permutation(n)


def _check_anchors(anchors, n):
    anchors = np.asarray(anchors, dtype=np.intp).ravel()
    if anchors.size == 0:
        raise InputError("need at least one anchor")
    if np.unique(anchors).size != anchors.size:
        raise InputError("anchor indices contain duplicates")
    if anchors.min() < 0 or anchors.max() >= n:
        raise InputError(f"anchor index out of range for n={n}")
    return anchors


def factorize_view(K, anchors, tol=PINV_RTOL):
    """Return ``(U, R)`` with ``R = (W^+)^{1/2}`` and ``U = K[:, anchors] R``."""
    K = np.asarray(K, dtype=float)
    anchors = _check_anchors(anchors, K.shape[0])
    Q = K[:, anchors]
    R = pinv_sqrt(Q[anchors], tol)
    return Q @ R, R


@dataclass(frozen=True)
class FactorStack:
    """Block-diagonal ``U = blockdiag(U_1, ..., U_v)`` kept as its blocks."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(np.asarray(b, dtype=float) for b in self.blocks)
        if not blocks:
            raise InputError("a factor stack needs at least one view")
        shape = blocks[0].shape
        for l, b in enumerate(blocks):
            if b.shape != shape:
                raise InputError(f"view {l} factor has shape {b.shape}, expected {shape}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n(self):
        return self.blocks[0].shape[0]

    @property
    def p(self):
        return self.blocks[0].shape[1]

    @property
    def v(self):
        return len(self.blocks)

    def dense(self):
        n, p = self.n, self.p
        U = np.zeros((n * self.v, p * self.v))
        for l, B in enumerate(self.blocks):
            U[l * n:(l + 1) * n, l * p:(l + 1) * p] = B
        return U

    def gram_blocks(self):
        """``U_l^T U_l`` for each view (the block diagonal of ``U^T U``)."""
        return tuple(B.T @ B for B in self.blocks)


@dataclass(frozen=True, eq=False)
class NystromFactors:
    U: tuple
    anchor_indices: np.ndarray
    W_pinv_sqrt: tuple
    permutation_seed: int
    permutation: np.ndarray

    @property
    def p(self):
        return int(self.anchor_indices.size)

    @property
    def v(self):
        return len(self.U)


def _factorize(columns, anchors, seed, perm, tol):
    Us, Rs = [], []
    for Q in columns:
        R = pinv_sqrt(Q[anchors], tol)
        Us.append(Q @ R)
        Rs.append(R)
    return NystromFactors(tuple(Us), anchors, tuple(Rs), int(seed), perm)


def nystrom_from_grams(H, p, seed, tol=PINV_RTOL):
    """Factorize every block of a :class:`GramStack` with one shared anchor set."""
    if not isinstance(H, GramStack):
        H = GramStack(tuple(H))
    if not 1 <= p <= H.n:
        raise InputError(f"landmark count p={p} outside [1, {H.n}]")
    perm = anchor_permutation(H.n, seed)
    anchors = perm[:p].copy()
    return _factorize([K[:, anchors] for K in H.blocks], anchors, seed, perm, tol)


def nystrom_from_views(views, kernel_configs, p, seed, tol=PINV_RTOL):
    """Same as :func:`nystrom_from_grams` but evaluates only the ``n x p`` kernel columns."""
    n = np.asarray(views[0]).shape[0]
    if any(np.asarray(X).shape[0] != n for X in views):
        raise InputError("views disagree on sample count")
    if not 1 <= p <= n:
        raise InputError(f"landmark count p={p} outside [1, {n}]")
    perm = anchor_permutation(n, seed)
    anchors = perm[:p].copy()
    cols = [cross_gram(cfg, X, np.asarray(X, dtype=float)[anchors])
            for cfg, X in zip(kernel_configs, views)]
    return _factorize(cols, anchors, seed, perm, tol)


def build_U(factors):
    ps = {U.shape[1] for U in factors.U}
    if len(ps) != 1:
        raise InputError(f"views were factorized with different landmark counts {sorted(ps)}")
    return FactorStack(factors.U)


def test_factor(cfg, test_points, anchor_points, W_pinv_sqrt):
    """``Q_test (W^+)^{1/2}``: multiply by ``U^T`` for the approximate test kernel."""
    return cross_gram(cfg, test_points, anchor_points) @ W_pinv_sqrt


test_factor.__test__ = False  # keep pytest from collecting it
