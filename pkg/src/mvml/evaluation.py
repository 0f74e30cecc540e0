"""Evaluation metrics and the Rademacher complexity bound."""
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError, MetricError
from .multiview import GramStack


def _pair(predictions, targets):
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(targets, dtype=float).ravel()
    if p.shape != t.shape:
        raise MetricError(f"{p.size} predictions for {t.size} targets")
    if t.size == 0:
        raise MetricError("empty input")
    return p, t


def nmse(predictions, targets):
    """Mean squared error divided by the (population) variance of the targets."""
    p, t = _pair(predictions, targets)
    var = float(np.var(t))
    if var == 0.0:
        raise MetricError("targets have zero variance; nMSE is undefined")
    return float(np.mean((p - t) ** 2)) / var


def r2(predictions, targets):
    return 1.0 - nmse(predictions, targets)


def accuracy(predicted, truth):
    p = np.asarray(predicted).ravel()
    t = np.asarray(truth).ravel()
    if p.size == 0:
        raise MetricError("empty input")
    if p.shape != t.shape:
        raise MetricError(f"{p.size} predictions for {t.size} labels")
    return float(np.mean(p == t))


@dataclass(frozen=True)
class BoundInputs:
    alpha: float
    beta: float
    view_grams: GramStack

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise InputError(f"alpha and beta must be positive, got {self.alpha!r}, {self.beta!r}")


@dataclass(frozen=True)
class BoundResult:
    exact: float
    tau_form: float
    tau: float


def bound_from_traces(alpha, beta, traces, n):
    """Bound from the per-view ``tr(K_l^2)`` values and the sample count.

    ``exact = beta * sqrt(alpha * sum(traces)) / n`` and, with
    ``tau = max(traces) / n``, ``tau_form = beta * sqrt(alpha * tau * v / n)``.
    """
    if not (alpha > 0 and beta > 0):
        raise InputError(f"alpha and beta must be positive, got {alpha!r}, {beta!r}")
    q = np.asarray(traces, dtype=float).ravel()
    if q.size == 0 or n < 1:
        raise InputError("need at least one view and one sample")
    if np.any(q < 0):
        raise InputError("traces of squared Gram matrices cannot be negative")
    exact = beta * np.sqrt(alpha * q.sum()) / n
    tau = q.max() / n
    tau_form = beta * np.sqrt(alpha * tau * q.size / n)
    return BoundResult(float(exact), float(tau_form), float(tau))


def rademacher_bound(inputs):
    # tr(K^2) = ||K||_F^2 for symmetric K
    traces = [float(np.sum(K * K)) for K in inputs.view_grams.blocks]
    return bound_from_traces(inputs.alpha, inputs.beta, traces, inputs.view_grams.n)
