"""Block operators for the multi-view kernel ``K = H A H``.

``H`` is never formed as a dense ``nv x nv`` matrix: a :class:`GramStack`
keeps the ``v`` per-view blocks and every product exploits that structure.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import InputError
from .kernels import gram
from .linalg import PINV_RTOL, spectral_pinv


@dataclass(frozen=True)
class GramStack:
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(np.asarray(b, dtype=float) for b in self.blocks)
        if not blocks:
            raise InputError("a Gram stack needs at least one view")
        n = blocks[0].shape[0]
        for l, b in enumerate(blocks):
            if b.shape != (n, n):
                raise InputError(f"view {l} Gram has shape {b.shape}, expected {(n, n)}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n(self):
        return self.blocks[0].shape[0]

    @property
    def v(self):
        return len(self.blocks)

    def dense(self):
        """Materialize ``blockdiag(K_1, ..., K_v)``; for tests and small problems only."""
        n, v = self.n, self.v
        H = np.zeros((n * v, n * v))
        for l, K in enumerate(self.blocks):
            H[l * n:(l + 1) * n, l * n:(l + 1) * n] = K
        return H

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        return np.concatenate([K @ x[l * n:(l + 1) * n] for l, K in enumerate(self.blocks)])


@dataclass(frozen=True)
class GroupLayout:
    """Partition of the ``v x v`` block grid into sparsity groups.

    Each group is a tuple of ``(row_view, col_view)`` pairs: either one
    diagonal block or both blocks of an off-diagonal pair.
    """

    v: int
    groups: tuple

    def index(self, group):
        try:
            return self.groups.index(tuple(group))
        except ValueError:
            raise InputError(f"group {group!r} is not part of this layout") from None


@lru_cache(maxsize=None)
def group_layout(v):
    if v < 1:
        raise InputError(f"need at least one view, got v={v}")
    diag = [((l, l),) for l in range(v)]
    pairs = [((l, m), (m, l)) for l in range(v) for m in range(l + 1, v)]
    return GroupLayout(v, tuple(diag + pairs))


@dataclass(frozen=True, eq=False)
class MetricMatrix:
    """Symmetric ``(v*b) x (v*b)`` metric seen as a ``v x v`` grid of ``b x b`` blocks.

    ``b`` is ``n`` for the full problem and ``p`` for the Nystrom one.
    """

    entries: np.ndarray
    n_views: int
    layout: GroupLayout = field(default=None)

    def __post_init__(self):
        A = np.asarray(self.entries, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % self.n_views:
            raise InputError(f"metric of shape {A.shape} does not split into {self.n_views} views")
        object.__setattr__(self, "entries", A)
        if self.layout is None:
            object.__setattr__(self, "layout", group_layout(self.n_views))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def block_size(self):
        return self.entries.shape[0] // self.n_views

    def block(self, l, m):
        b = self.block_size
        return self.entries[l * b:(l + 1) * b, m * b:(m + 1) * b]

    def group_slices(self, group):
        b = self.block_size
        return [(slice(l * b, (l + 1) * b), slice(m * b, (m + 1) * b)) for l, m in group]


def build_gram_stack(views, kernel_configs):
    if len(views) != len(kernel_configs):
        raise InputError(f"{len(views)} views but {len(kernel_configs)} kernel configs")
    sizes = {np.asarray(X).shape[0] for X in views}
    if len(sizes) != 1:
        raise InputError(f"views disagree on sample count: {sorted(sizes)}")
    return GramStack(tuple(gram(cfg, X) for cfg, X in zip(kernel_configs, views)))


def assemble_K(H, A):
    """Block ``(l, m)`` of the result is ``K_l A_lm K_m``."""
    A = np.asarray(A, dtype=float)
    n, v = H.n, H.v
    if A.shape != (n * v, n * v):
        raise InputError(f"metric shape {A.shape} does not match {v} views of {n} samples")
    K = np.empty_like(A)
    for l in range(v):
        for m in range(l, v):
            blk = H.blocks[l] @ A[l * n:(l + 1) * n, m * n:(m + 1) * n] @ H.blocks[m]
            K[l * n:(l + 1) * n, m * n:(m + 1) * n] = blk
            K[m * n:(m + 1) * n, l * n:(l + 1) * n] = blk.T
    return K


def preset_metric_identity_blocks(H, tol=PINV_RTOL):
    """Metric whose kernel has the one-view Grams on its diagonal and zeros elsewhere."""
    n, v = H.n, H.v
    A = np.zeros((n * v, n * v))
    for l, K in enumerate(H.blocks):
        A[l * n:(l + 1) * n, l * n:(l + 1) * n] = spectral_pinv(K, tol)
    return MetricMatrix(A, v)


def preset_metric_cov(H):
    """``A_lm = I / n`` for every pair, giving ``K_lm = K_l K_m / n``."""
    n, v = H.n, H.v
    return MetricMatrix(np.kron(np.ones((v, v)), np.eye(n)) / n, v)


def group_frobenius(A, group):
    if not isinstance(A, MetricMatrix):
        raise InputError("group_frobenius needs a MetricMatrix (to know the block layout)")
    A.layout.index(group)
    return float(np.sqrt(sum(np.sum(A.entries[r, c] ** 2) for r, c in A.group_slices(group))))
