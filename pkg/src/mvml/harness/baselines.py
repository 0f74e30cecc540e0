"""Kernel ridge regression in early, late and single-view fusion."""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..exceptions import InputError, NumericalError
from ..kernels import cross_gram, gram, resolve_kernel


def ridge_solve(K, y, lam):
    """Solve ``(K + lam I) c = y``, retrying once with diagonal jitter."""
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = K.shape[0]
    B = K + lam * np.eye(n)
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(B), y)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        jitter = 1e-10 * max(abs(np.trace(B)), 1.0)
        try:
            return scipy.linalg.cho_solve(scipy.linalg.cho_factor(B + jitter * np.eye(n)), y)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise NumericalError(f"kernel ridge system is singular: {exc}") from exc


@dataclass(frozen=True, eq=False)
class KRRModel:
    mode: str
    configs: tuple
    points: tuple
    coefs: tuple

    def predict(self, views):
        """Real-valued scores; the columns of ``coefs`` are separate outputs."""
        feats = self._inputs(views)
        outs = [cross_gram(c, X, P) @ a for c, X, P, a in zip(self.configs, feats, self.points, self.coefs)]
        return sum(outs) / len(outs)

    def _inputs(self, views):
        views = [np.asarray(X, dtype=float) for X in views]
        if self.mode == "early":
            return [np.hstack(views)]
        if self.mode == "late":
            return views
        return [views[int(self.mode.split(":")[1])]]


def krr_baseline(views, y, mode="early", lam=1e-2, kernel="gaussian", bandwidth="mean_distance"):
    """Fit a KRR baseline.

    ``mode`` is ``"early"`` (one kernel on concatenated features), ``"late"``
    (one KRR per view, predictions averaged) or ``"single:<l>"``. ``y`` may
    be a matrix with one column per output (one-vs-all targets).
    """
    views = [np.asarray(X, dtype=float) for X in views]
    if mode == "early":
        inputs = [np.hstack(views)]
    elif mode == "late":
        inputs = views
    elif mode.startswith("single:"):
        l = int(mode.split(":")[1])
        if not 0 <= l < len(views):
            raise InputError(f"view index {l} out of range")
        inputs = [views[l]]
    else:
        raise InputError(f"unknown KRR mode {mode!r}")
    kernels = kernel if isinstance(kernel, (list, tuple)) else [kernel] * len(inputs)
    configs, coefs = [], []
    for fam, X in zip(kernels, inputs):
        cfg = resolve_kernel(fam, bandwidth, X)
        configs.append(cfg)
        coefs.append(ridge_solve(gram(cfg, X), y, lam))
    return KRRModel(mode, tuple(configs), tuple(inputs), tuple(coefs))
