"""Scalar kernels, Gram matrices and bandwidth heuristics."""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .exceptions import InputError

FAMILIES = ("gaussian", "linear")


@dataclass(frozen=True)
class KernelConfig:
    """A kernel family with its bandwidth.

    ``sigma`` is in the units of the input coordinates; the equivalent
    ``gamma = 1 / (2 sigma^2)`` is exposed as a property.
    """

    family: str = "gaussian"
    sigma: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "gaussian" and not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InputError(f"gaussian kernel needs sigma > 0, got {self.sigma!r}")

    @property
    def gamma(self):
        return 1.0 / (2.0 * self.sigma ** 2)

    @classmethod
    def from_gamma(cls, gamma):
        if gamma <= 0:
            raise InputError(f"gamma must be positive, got {gamma!r}")
        return cls("gaussian", float(np.sqrt(1.0 / (2.0 * gamma))))


def _as_points(points, name="points"):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InputError(f"{name} must be a 2-D array, got shape {X.shape}")
    return X


def eval_kernel(cfg, x, z):
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if x.shape != z.shape:
        raise InputError(f"dimension mismatch: {x.shape[0]} vs {z.shape[0]}")
    if cfg.family == "linear":
        return float(x @ z)
    d = x - z
    return float(np.exp(-(d @ d) / (2.0 * cfg.sigma ** 2)))


def gram(cfg, points):
    """Gram matrix of ``points`` (rows are samples), exactly symmetric."""
    X = _as_points(points)
    n = X.shape[0]
    if n == 0:
        raise InputError("cannot build a Gram matrix from an empty point set")
    if cfg.family == "linear":
        G = X @ X.T
    else:
        # pdist fills the strict upper triangle; squareform mirrors it with a zero diagonal
        sq = squareform(pdist(X, "sqeuclidean")) if n > 1 else np.zeros((1, 1))
        G = np.exp(-sq / (2.0 * cfg.sigma ** 2))
    upper = np.triu(G)
    return upper + np.triu(G, 1).T


def cross_gram(cfg, test, train):
    T = _as_points(test, "test")
    X = _as_points(train, "train")
    if T.shape[1] != X.shape[1]:
        raise InputError(f"dimension mismatch: test has {T.shape[1]} features, train has {X.shape[1]}")
    if cfg.family == "linear":
        return T @ X.T
    return np.exp(-cdist(T, X, "sqeuclidean") / (2.0 * cfg.sigma ** 2))


def mean_distance_sigma(points):
    """Mean Euclidean distance over all n^2 ordered pairs, zero diagonal included."""
    X = _as_points(points)
    n = X.shape[0]
    if n < 2:
        raise InputError("need at least two points to estimate a bandwidth")
    total = 2.0 * pdist(X).sum()
    if total == 0.0:
        raise InputError("all points are identical: bandwidth would be zero")
    return total / n ** 2


def inverse_features_sigma(points):
    """Bandwidth with gamma fixed to 1 / (number of features)."""
    X = _as_points(points)
    return float(np.sqrt(X.shape[1] / 2.0))


def resolve_kernel(family, bandwidth, points):
    """Build a :class:`KernelConfig` from a policy name or explicit sigma.

    ``bandwidth`` is ``"mean_distance"``, ``"inverse_features"`` or a number.
    Linear kernels ignore it.
    """
    if family == "linear":
        return KernelConfig("linear", 1.0)
    if isinstance(bandwidth, str):
        if bandwidth == "mean_distance":
            return KernelConfig(family, mean_distance_sigma(points))
        if bandwidth == "inverse_features":
            return KernelConfig(family, inverse_features_sigma(points))
        try:
            bandwidth = float(bandwidth)
        except ValueError:
            raise InputError(f"unknown bandwidth policy {bandwidth!r}") from None
    return KernelConfig(family, float(bandwidth))
