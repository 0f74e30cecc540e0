"""Alternating solver for multi-view metric learning.

One iteration updates, in order, the coefficient vector ``g`` (exact
minimizer for fixed metric), optionally the view weights ``w`` (least
squares), and the metric ``A`` (gradient step for the Frobenius penalty,
proximal group step for the block-sparse penalty).

The same code runs the full problem, where the design blocks are the view
Grams ``K_l``, and the Nystrom problem, where they are the ``n x p`` factors
``U_l`` and every metric quantity lives in the ``pv``-dimensional space.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from .exceptions import ConfigError, DivergenceError, InputError, NumericalError
from .linalg import PINV_RTOL, check_psd, spectral_decomposition, spectral_pinv, symmetrize
from .multiview import GramStack, MetricMatrix, group_layout
from .nystrom import FactorStack, NystromFactors, build_U

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig", "SolverState", "combiner_apply", "update_g", "grad_h",
    "update_A_frobenius", "update_A_sparse", "update_w", "objective", "fit",
    "check_psd", "initial_metric",
]

A_INITS = ("scaled_identity", "preset_cov", "preset_identity_blocks")
NYSTROM_STEPS = ("compressed", "lifted")


@dataclass
class SolverConfig:
    """Hyperparameters of one fit.

    ``lam`` weighs the RKHS penalty and ``eta`` the metric penalty; ``mu`` is
    the initial metric step, halved while a step would raise the objective.
    ``fixed_metric`` keeps ``A`` at its initial value (the preset-kernel
    baselines). ``nystrom_step`` picks the metric-step geometry in Nystrom
    mode: ``"compressed"`` differentiates with respect to the compressed
    metric directly, ``"lifted"`` takes the step on the implied full metric
    and compresses it, which makes ``p = n`` reproduce the full solver.
    """

    lam: float = 1e-2
    eta: float = 1e-2
    mu: float = 1e-2
    max_iters: int = 200
    tol: float = 1e-6
    learn_w: bool = False
    sparse: bool = False
    w_init: Optional[np.ndarray] = None
    A_init: str = "scaled_identity"
    fixed_metric: bool = False
    nystrom_step: str = "compressed"
    max_halvings: int = 40

    def validate(self):
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam!r}")
        if not self.eta >= 0:
            raise ConfigError(f"eta must be non-negative, got {self.eta!r}")
        if not self.mu > 0:
            raise ConfigError(f"step size mu must be positive, got {self.mu!r}")
        if not self.sparse and self.mu * self.eta >= 0.5:
            raise ConfigError(
                f"mu*eta = {self.mu * self.eta:g} >= 1/2: positivity of the metric is not guaranteed")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.A_init not in A_INITS:
            raise ConfigError(f"unknown A_init {self.A_init!r}; expected one of {A_INITS}")
        if self.nystrom_step not in NYSTROM_STEPS:
            raise ConfigError(f"unknown nystrom_step {self.nystrom_step!r}")
        return self


@dataclass
class SolverState:
    A: MetricMatrix
    g: np.ndarray
    w: np.ndarray
    objective_trace: list = field(default_factory=list)
    mode: str = "full"
    iterations: int = 0
    converged: bool = False
    rejected_indefinite: int = 0


class _Spectrum(NamedTuple):
    vals: np.ndarray
    vecs: np.ndarray

    @property
    def full_rank_pd(self):
        return self.vals.size == self.vecs.shape[0] and bool(np.all(self.vals > 0))

    def pinv(self):
        return (self.vecs / self.vals) @ self.vecs.T

    def apply_pinv(self, x):
        return self.vecs @ ((self.vecs.T @ x) / self.vals)


def _spectrum(A):
    return _Spectrum(*spectral_decomposition(np.asarray(A, dtype=float), PINV_RTOL))


def _blocks(design):
    if isinstance(design, NystromFactors):
        design = build_U(design)
    if not isinstance(design, (GramStack, FactorStack)):
        design = FactorStack(tuple(design))
    return design


def _stacked(design, w):
    """The ``n x vq`` matrix ``(w^T kron I_n) blockdiag(B_1..B_v)``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (design.v,):
        raise InputError(f"weights have shape {w.shape}, expected ({design.v},)")
    return np.hstack([wl * B for wl, B in zip(w, design.blocks)])


def combiner_apply(w, x):
    """Apply ``w^T kron I_n`` to a stacked ``nv`` vector."""
    w = np.asarray(w, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    v = w.size
    if v == 0 or x.size % v:
        raise InputError(f"vector of length {x.size} does not split into {v} blocks")
    return w @ x.reshape(v, -1)


def _solve_sym(B, rhs):
    try:
        return scipy.linalg.solve(B, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        jitter = 1e-12 * max(abs(np.trace(B)), 1.0)
        try:
            return scipy.linalg.solve(B + jitter * np.eye(B.shape[0]), rhs, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise NumericalError(f"normal equations are singular: {exc}") from exc


def _refined_solve(B, rhs, steps=2):
    x = _solve_sym(B, rhs)
    for _ in range(steps):
        r = rhs - B @ x
        if not np.any(r):
            break
        x = x + _solve_sym(B, r)
    return x


def _update_g(design, spec, w, y, lam, tol):
    M = _stacked(design, w)
    rhs = M.T @ y
    if spec.full_rank_pd:
        B = symmetrize(M.T @ M + lam * spec.pinv())
        g = _refined_solve(B, rhs)
        resid = np.linalg.norm(B @ g - rhs)
    else:
        # g = A H c lies in range(A); solve in that subspace
        MV = M @ spec.vecs
        B = symmetrize(MV.T @ MV + lam * np.diag(1.0 / spec.vals))
        rhs_r = spec.vecs.T @ rhs
        z = _refined_solve(B, rhs_r) if rhs_r.size else rhs_r
        g = spec.vecs @ z
        resid = np.linalg.norm(B @ z - rhs_r) if rhs_r.size else 0.0
    if not np.all(np.isfinite(g)):
        raise NumericalError("g-update produced non-finite values")
    scale = np.linalg.norm(rhs)
    if resid > tol * max(scale, np.finfo(float).tiny):
        log.warning("g-update residual %.3g exceeds %.1g relative", resid / max(scale, 1e-300), tol)
    return g


def update_g(design, A, w, y, lam, tol=1e-8):
    """Minimize the objective over ``g`` for fixed metric and weights.

    Solves ``(M^T M + lam A^+) g = M^T y`` with ``M = (w^T kron I_n) H``
    (or ``U`` in Nystrom mode). When ``A`` is rank deficient the solution is
    sought in the range of ``A``, where the penalty is a true norm.
    """
    design = _blocks(design)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != design.n:
        raise InputError(f"y has {y.size} entries, expected {design.n}")
    return _update_g(design, _spectrum(A), w, y, lam, tol)


def grad_h(A, g, lam, tol=PINV_RTOL):
    """Gradient of ``lam <g, A^+ g>`` with respect to ``A``: ``-lam A^+ g g^T A^+``."""
    r = spectral_pinv(np.asarray(A, dtype=float), tol) @ np.asarray(g, dtype=float)
    return -lam * np.outer(r, r)


def _as_metric(A, n_views=None):
    if isinstance(A, MetricMatrix):
        return A
    return MetricMatrix(np.asarray(A, dtype=float), n_views or 1)


def _lift(r, precond):
    if precond is None:
        return r
    q = precond[0].shape[0]
    return np.concatenate([P @ r[l * q:(l + 1) * q] for l, P in enumerate(precond)])


def _frobenius_step(A, r, lam, eta, mu):
    return symmetrize((1.0 - 2.0 * mu * eta) * A + mu * lam * np.outer(r, r))


def update_A_frobenius(A, g, lam, eta, mu, precond=None):
    """Gradient step ``(1 - 2 mu eta) A + mu lam A^+ g g^T A^+``.

    ``precond`` (per-view ``U_l^T U_l`` blocks) switches to the lifted
    Nystrom geometry.
    """
    if mu * eta >= 0.5:
        raise ConfigError(f"mu*eta = {mu * eta:g} >= 1/2: positivity of the metric is not guaranteed")
    M = _as_metric(A)
    r = _lift(spectral_pinv(M.entries) @ np.asarray(g, dtype=float), precond)
    return MetricMatrix(_frobenius_step(M.entries, r, lam, eta, mu), M.n_views, M.layout)


def _group_prox(Z, metric_like, threshold):
    out = Z.copy()
    for group in metric_like.layout.groups:
        sl = metric_like.group_slices(group)
        norm = np.sqrt(sum(np.sum(Z[r, c] ** 2) for r, c in sl))
        factor = max(0.0, 1.0 - threshold / norm) if norm > 0 else 0.0
        for r, c in sl:
            if factor == 0.0:
                out[r, c] = 0.0
            else:
                out[r, c] = factor * Z[r, c]
    return out


def _sparse_step(M, r, lam, eta, mu):
    Z = M.entries + mu * lam * np.outer(r, r)
    return MetricMatrix(_group_prox(symmetrize(Z), M, mu * eta), M.n_views, M.layout)


def _clear_dead_rows(M):
    """Zero off-diagonal pairs touching a view whose diagonal block was killed.

    A PSD matrix with a zero diagonal block has zero off-diagonal blocks in that
    row and column, so such a candidate cannot be fixed by a smaller step.
    """
    dead = [l for l in range(M.n_views) if not np.any(M.block(l, l))]
    if not dead:
        return M
    out = M.entries.copy()
    q = M.block_size
    for l in dead:
        out[l * q:(l + 1) * q, :] = 0.0
        out[:, l * q:(l + 1) * q] = 0.0
    return MetricMatrix(out, M.n_views, M.layout)


def update_A_sparse(A, g, lam, eta, mu, layout=None, precond=None):
    """Proximal gradient step for the group penalty ``eta * sum_gamma ||A_gamma||_F``.

    The gradient step on ``lam <g, A^+ g>`` is followed by block
    soft-thresholding at ``mu * eta``; both blocks of an off-diagonal pair share
    one shrink factor, so symmetry is kept and killed groups are exactly 0.0.
    """
    M = _as_metric(A, layout.v if layout is not None else None)
    if layout is not None and layout is not M.layout:
        M = MetricMatrix(M.entries, layout.v, layout)
    r = _lift(spectral_pinv(M.entries) @ np.asarray(g, dtype=float), precond)
    return _sparse_step(M, r, lam, eta, mu)


def update_w(design, g, y):
    """Least-squares view weights; ``Z`` holds the per-view outputs ``B_l g_l`` as columns."""
    design = _blocks(design)
    g = np.asarray(g, dtype=float)
    q = design.blocks[0].shape[1]
    Z = np.column_stack([B @ g[l * q:(l + 1) * q] for l, B in enumerate(design.blocks)])
    w, *_ = np.linalg.lstsq(Z, np.asarray(y, dtype=float).ravel(), rcond=None)
    return w


def _metric_penalty(M, eta, sparse):
    if eta == 0.0:
        return 0.0
    if not sparse:
        return eta * float(np.sum(M.entries ** 2))
    total = 0.0
    for group in M.layout.groups:
        total += np.sqrt(sum(np.sum(M.entries[r, c] ** 2) for r, c in M.group_slices(group)))
    return eta * float(total)


def _outside_range(spec, g):
    if spec.vals.size == spec.vecs.shape[0]:
        return False
    off = g - spec.vecs @ (spec.vecs.T @ g)
    return np.linalg.norm(off) > 1e-8 * max(np.linalg.norm(g), np.finfo(float).tiny)


def _objective(design, M, spec, g, w, y, lam, eta, sparse):
    if _outside_range(spec, g):
        return np.inf
    resid = y - _stacked(design, w) @ g
    return float(resid @ resid + lam * (g @ spec.apply_pinv(g)) + _metric_penalty(M, eta, sparse))


def objective(design, A, g, w, y, lam, eta, sparse=False):
    """``||y - (w^T kron I) H g||^2 + lam <g, A^+ g> + eta * R(A)``.

    ``R`` is the squared Frobenius norm, or the sum of group Frobenius norms
    when ``sparse`` is set. The penalty is taken as ``+inf`` when ``g`` leaves
    the range of ``A`` (the closed convex extension of ``<g, A^+ g>``).
    """
    design = _blocks(design)
    M = _as_metric(A, design.v)
    return _objective(design, M, _spectrum(M.entries), np.asarray(g, dtype=float),
                      w, np.asarray(y, dtype=float).ravel(), lam, eta, sparse)


def initial_metric(design, kind="scaled_identity", lifted=False):
    """Starting metric for a fit.

    In Nystrom mode the presets are the compressions ``U^T A U`` of their
    full-space definitions, with ``K_l`` replaced by ``U_l U_l^T``.
    """
    design = _blocks(design)
    v, n = design.v, design.n
    q = design.blocks[0].shape[1]
    nystrom = isinstance(design, FactorStack)
    A = np.zeros((v * q, v * q))
    blk = lambda l, m: (slice(l * q, (l + 1) * q), slice(m * q, (m + 1) * q))
    if kind == "scaled_identity":
        if nystrom and lifted:
            for l, B in enumerate(design.blocks):
                A[blk(l, l)] = B.T @ B / v
        else:
            A = np.eye(v * q) / v
    elif kind == "preset_cov":
        if nystrom:
            for l in range(v):
                for m in range(v):
                    A[blk(l, m)] = design.blocks[l].T @ design.blocks[m] / n
        else:
            A = np.kron(np.ones((v, v)), np.eye(n)) / n
    elif kind == "preset_identity_blocks":
        for l, B in enumerate(design.blocks):
            if nystrom:
                # U^T (U U^T)^+ U is the projector onto the row space of U
                _, s, Vt = np.linalg.svd(B, full_matrices=False)
                Vr = Vt[s > PINV_RTOL * max(s.max(initial=0.0), 1e-300)]
                A[blk(l, l)] = Vr.T @ Vr
            else:
                A[blk(l, l)] = spectral_pinv(B)
    else:
        raise ConfigError(f"unknown A_init {kind!r}")
    return MetricMatrix(symmetrize(A), v)


def _check_finite(value, iteration):
    if not np.isfinite(value):
        raise DivergenceError(iteration, value)
    return value


def fit(design, y, cfg=None, A0=None, callback=None):
    """Run the alternating solver until the relative objective change drops below ``cfg.tol``.

    ``design`` is a :class:`GramStack` (full mode) or a
    :class:`NystromFactors` / :class:`FactorStack` (Nystrom mode).
    ``objective_trace`` gets the starting value and one entry after every
    sub-step. ``callback(iteration, A, g, w)`` is called with the starting
    point (iteration 0) and after every iteration.
    """
    cfg = (cfg or SolverConfig()).validate()
    design = _blocks(design)
    mode = "nystrom" if isinstance(design, FactorStack) else "full"
    y = np.asarray(y, dtype=float).ravel()
    if y.size != design.n:
        raise InputError(f"y has {y.size} entries, expected {design.n}")
    v = design.v
    q = design.blocks[0].shape[1]
    w = np.full(v, 1.0 / v) if cfg.w_init is None else np.asarray(cfg.w_init, dtype=float).copy()
    if w.shape != (v,):
        raise InputError(f"w_init has shape {w.shape}, expected ({v},)")
    lifted = mode == "nystrom" and cfg.nystrom_step == "lifted"
    precond = design.gram_blocks() if lifted else None
    if A0 is None:
        A = initial_metric(design, cfg.A_init, lifted=lifted)
    else:
        A = A0 if isinstance(A0, MetricMatrix) else MetricMatrix(np.asarray(A0, dtype=float), v)
        if A.entries.shape != (v * q, v * q):
            raise InputError(f"A0 has shape {A.entries.shape}, expected {(v * q, v * q)}")
    if not check_psd(A.entries).is_psd:
        warnings.warn("initial metric is not positive semidefinite", RuntimeWarning, stacklevel=2)

    spec = _spectrum(A.entries)
    g = np.zeros(v * q)
    lam, eta = cfg.lam, cfg.eta
    f = _check_finite(_objective(design, A, spec, g, w, y, lam, eta, cfg.sparse), 0)
    state = SolverState(A=A, g=g, w=w, objective_trace=[f], mode=mode)
    if callback is not None:
        callback(0, A, g, w)

    g_exact = False
    for it in range(1, cfg.max_iters + 1):
        f_start = f
        if not g_exact:
            g = _update_g(design, spec, w, y, lam, 1e-8)
            f = _check_finite(_objective(design, A, spec, g, w, y, lam, eta, cfg.sparse), it)
        state.objective_trace.append(f)

        g_exact = False
        if cfg.learn_w:
            w = update_w(design, g, y)
            f = _check_finite(_objective(design, A, spec, g, w, y, lam, eta, cfg.sparse), it)
            state.objective_trace.append(f)

        if not cfg.fixed_metric:
            A_prev = A
            A, spec, g, f = _metric_step(design, A, spec, g, w, y, cfg, f, precond, state)
            f = _check_finite(f, it)
            state.objective_trace.append(f)
            # the line search already minimized over g for the accepted metric
            g_exact = A is not A_prev

        state.iterations = it
        if callback is not None:
            callback(it, A, g, w)
        if abs(f_start - f) <= cfg.tol * max(abs(f_start), np.finfo(float).tiny):
            state.converged = True
            break

    state.A, state.g, state.w = A, g, w
    if state.rejected_indefinite:
        warnings.warn(
            f"{state.rejected_indefinite} proximal step(s) produced an indefinite metric and were "
            "shortened", RuntimeWarning, stacklevel=2)
    return state


def _metric_direction(design, spec, g, w, y, lam):
    """Vector ``r`` with metric gradient ``-lam r r^T``.

    On the range of ``A`` this is ``A^+ g``; on its null space it is the
    residual form ``M^T (y - M g) / lam``, which equals ``A^+ g`` on the range
    whenever ``g`` is the exact minimizer and lets dead blocks come back.
    """
    r = spec.apply_pinv(g)
    if spec.vals.size < spec.vecs.shape[0]:
        M = _stacked(design, w)
        s = M.T @ (y - M @ g) / lam
        r = r + s - spec.vecs @ (spec.vecs.T @ s)
    return r


def _metric_step(design, A, spec, g, w, y, cfg, f_current, precond, state):
    """Backtracking metric update.

    ``mu`` is halved until the objective, re-minimized over ``g`` for the
    candidate metric, does not exceed the current value. Returns the new
    metric with its spectrum, the matching ``g`` and the objective.
    """
    r = _lift(_metric_direction(design, spec, g, w, y, cfg.lam), precond)
    mu = cfg.mu
    for _ in range(cfg.max_halvings + 1):
        if cfg.sparse:
            cand = _clear_dead_rows(_sparse_step(A, r, cfg.lam, cfg.eta, mu))
        else:
            cand = MetricMatrix(_frobenius_step(A.entries, r, cfg.lam, cfg.eta, mu), A.n_views, A.layout)
        cand_spec = _spectrum(cand.entries)
        if cfg.sparse and cand_spec.vals.size and cand_spec.vals.min() < -1e-8 * np.abs(cand_spec.vals).max():
            state.rejected_indefinite += 1
            mu *= 0.5
            continue
        g_cand = _update_g(design, cand_spec, w, y, cfg.lam, 1e-8)
        f_cand = _objective(design, cand, cand_spec, g_cand, w, y, cfg.lam, cfg.eta, cfg.sparse)
        if f_cand <= f_current:
            return cand, cand_spec, g_cand, f_cand
        mu *= 0.5
    return A, spec, g, f_current
