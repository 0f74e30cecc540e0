"""Trained models: packaging, prediction and multiclass reduction."""
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError
from .kernels import KernelConfig, cross_gram
from .multiview import build_gram_stack
from .nystrom import landmark_count, nystrom_from_views, test_factor
from .solver import SolverConfig, fit

TASKS = ("regression", "binary", "one_vs_all")
METHODS = ("mvml", "mvml_sparse", "mvml_cov", "mvml_i")


@dataclass(frozen=True, eq=False)
class ModelState:
    """Everything needed to predict.

    ``coefs`` has one row per output head (one for regression and binary
    tasks, one per class for one-vs-all) holding ``g`` (full mode, length
    ``nv``) or the compressed coefficients (Nystrom mode, length ``pv``);
    ``weights`` holds the matching view weights. ``points`` are the training
    samples per view in full mode and the anchor samples in Nystrom mode.
    """

    mode: str
    kernel_configs: tuple
    weights: np.ndarray
    coefs: np.ndarray
    points: tuple
    W_pinv_sqrt: tuple = None
    task: str = "regression"
    classes: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("full", "nystrom"):
            raise InputError(f"unknown mode {self.mode!r}")
        if self.task not in TASKS:
            raise InputError(f"unknown task {self.task!r}")
        if (self.mode == "nystrom") != (self.W_pinv_sqrt is not None):
            raise InputError("W_pinv_sqrt must be present exactly in nystrom mode")
        object.__setattr__(self, "weights", np.atleast_2d(np.asarray(self.weights, dtype=float)))
        object.__setattr__(self, "coefs", np.atleast_2d(np.asarray(self.coefs, dtype=float)))

    @property
    def n_views(self):
        return len(self.kernel_configs)

    @property
    def w(self):
        return self.weights[0]

    @property
    def g(self):
        return self.coefs[0]


def _check_views(model, views):
    if len(views) != model.n_views:
        raise InputError(f"model has {model.n_views} views, got {len(views)}")
    out = []
    for l, (X, P) in enumerate(zip(views, model.points)):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != P.shape[1]:
            raise InputError(f"view {l}: expected {P.shape[1]} features, got {X.shape[1]}")
        out.append(X)
    if len({X.shape[0] for X in out}) != 1:
        raise InputError("test views disagree on sample count")
    return out


def _view_features(model, views):
    """Per-view test features: ``k_l(x)`` (full) or ``Q_test (W^+)^{1/2}`` (Nystrom)."""
    views = _check_views(model, views)
    if model.mode == "full":
        return [cross_gram(c, X, P) for c, X, P in zip(model.kernel_configs, views, model.points)]
    return [test_factor(c, X, P, R)
            for c, X, P, R in zip(model.kernel_configs, views, model.points, model.W_pinv_sqrt)]


def predict_views(model, views, head=0):
    """Per-view outputs ``f_l(x)`` as an ``m x v`` matrix."""
    feats = _view_features(model, views)
    q = feats[0].shape[1]
    g = model.coefs[head]
    return np.column_stack([F @ g[l * q:(l + 1) * q] for l, F in enumerate(feats)])


def predict_scores(model, views):
    """Combined real-valued scores, one column per head."""
    feats = _view_features(model, views)
    q = feats[0].shape[1]
    cols = []
    for g, w in zip(model.coefs, model.weights):
        cols.append(sum(w[l] * (F @ g[l * q:(l + 1) * q]) for l, F in enumerate(feats)))
    return np.column_stack(cols)


def predict(model, views):
    """Weighted sum of the view outputs; ``m x k`` for one-vs-all models."""
    scores = predict_scores(model, views)
    return scores[:, 0] if scores.shape[1] == 1 else scores


def decide(scores, classes):
    """Map scores to labels: sign for one column, argmax (lowest class wins ties) otherwise."""
    scores = np.asarray(scores, dtype=float)
    classes = np.asarray(classes)
    if scores.ndim == 1 or scores.shape[1] == 1:
        return np.where(scores.ravel() > 0, classes[1], classes[0])
    return classes[np.argmax(scores, axis=1)]


def predict_classes(model, views):
    if model.task == "regression":
        raise InputError("regression models do not predict classes")
    return decide(predict_scores(model, views), model.classes)


def method_config(method, cfg):
    """Adapt a solver config to one of the MVML method variants."""
    if method not in METHODS:
        raise InputError(f"unknown method {method!r}; expected one of {METHODS}")
    kw = dict(vars(cfg))
    if method == "mvml_sparse":
        kw["sparse"] = True
    elif method == "mvml_cov":
        kw.update(fixed_metric=True, A_init="preset_cov")
    elif method == "mvml_i":
        kw.update(fixed_metric=True, A_init="preset_identity_blocks")
    return SolverConfig(**kw)


def _design(views, kernel_configs, fraction, seed, mode):
    n = np.asarray(views[0]).shape[0]
    if mode == "auto":
        mode = "full" if fraction >= 1.0 else "nystrom"
    if mode == "full":
        return "full", build_gram_stack(views, kernel_configs), None
    p = landmark_count(fraction, n)
    factors = nystrom_from_views(views, kernel_configs, p, seed)
    return "nystrom", factors, factors


def _package(mode, kernel_configs, views, factors, states, task, classes, meta):
    if mode == "full":
        points = tuple(np.array(X, dtype=float) for X in views)
        R = None
    else:
        points = tuple(np.asarray(X, dtype=float)[factors.anchor_indices].copy() for X in views)
        R = tuple(factors.W_pinv_sqrt)
    meta = dict(meta)
    meta["objective_trace_tail"] = [list(map(float, s.objective_trace[-5:])) for s in states]
    meta["iterations"] = [int(s.iterations) for s in states]
    return ModelState(
        mode=mode,
        kernel_configs=tuple(kernel_configs),
        weights=np.vstack([s.w for s in states]),
        coefs=np.vstack([s.g for s in states]),
        points=points,
        W_pinv_sqrt=R,
        task=task,
        classes=None if classes is None else np.asarray(classes),
        metadata=meta,
    )


def _meta(method, cfg, fraction, seed):
    return {"method": method, "lambda": cfg.lam, "eta": cfg.eta, "mu": cfg.mu,
            "fraction": float(fraction), "seed": int(seed), "learn_w": cfg.learn_w,
            "sparse": cfg.sparse, "nystrom_step": cfg.nystrom_step}


def train(views, y, kernel_configs, cfg=None, *, task="regression", method="mvml",
          fraction=1.0, seed=0, mode="auto"):
    """Fit a model and return it with the solver states (one per head).

    ``task="classification"`` chooses a binary model for two classes and
    one-vs-all otherwise.
    """
    cfg = method_config(method, cfg or SolverConfig())
    views = [np.asarray(X, dtype=float) for X in views]
    y = np.asarray(y).ravel()
    if task == "classification":
        classes = np.unique(y)
        task = "binary" if classes.size == 2 else "one_vs_all"
    if task == "one_vs_all":
        return fit_one_vs_all(views, y, kernel_configs, cfg, method=method,
                              fraction=fraction, seed=seed, mode=mode)
    mode, design, factors = _design(views, kernel_configs, fraction, seed, mode)
    classes = None
    target = y.astype(float)
    if task == "binary":
        classes = np.unique(y)
        if classes.size != 2:
            raise InputError(f"binary task needs exactly 2 classes, got {classes.size}")
        target = np.where(y == classes[1], 1.0, -1.0)
    t0 = time.perf_counter()
    state = fit(design, target, cfg)
    meta = _meta(method, cfg, fraction, seed)
    meta["fit_seconds"] = time.perf_counter() - t0
    model = _package(mode, kernel_configs, views, factors, [state], task, classes, meta)
    return model, [state]


def fit_one_vs_all(views, labels, kernel_configs, cfg=None, *, method="mvml",
                   fraction=1.0, seed=0, mode="auto"):
    """One +1/-1 model per class over a shared design; predict by argmax."""
    cfg = method_config(method, cfg or SolverConfig())
    views = [np.asarray(X, dtype=float) for X in views]
    labels = np.asarray(labels).ravel()
    classes = np.unique(labels)
    if classes.size < 2:
        raise InputError(f"one-vs-all needs at least 2 classes, got {classes.size}")
    mode, design, factors = _design(views, kernel_configs, fraction, seed, mode)
    t0 = time.perf_counter()
    states = [fit(design, np.where(labels == c, 1.0, -1.0), cfg) for c in classes]
    meta = _meta(method, cfg, fraction, seed)
    meta["fit_seconds"] = time.perf_counter() - t0
    model = _package(mode, kernel_configs, views, factors, states, "one_vs_all", classes, meta)
    return model, states


def training_outputs(design, state):
    """``(w^T kron I) B g`` on the training design, for consistency checks."""
    q = design.blocks[0].shape[1]
    return sum(w * (B @ state.g[l * q:(l + 1) * q])
               for l, (w, B) in enumerate(zip(state.w, design.blocks)))


__all__ = [
    "ModelState", "KernelConfig", "predict_views", "predict_scores", "predict", "decide",
    "predict_classes", "train", "fit_one_vs_all", "method_config", "training_outputs",
]
