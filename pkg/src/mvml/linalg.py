"""Spectral helpers: pseudo-inverses and positivity checks."""
from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError

#: Relative singular-value cutoff used wherever a pseudo-inverse appears.
PINV_RTOL = 1e-10


def symmetrize(M):
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def spectral_decomposition(A, rtol=PINV_RTOL):
    """Eigen-decompose a symmetric matrix and keep the numerically non-zero part.

    Returns ``(values, vectors)`` restricted to eigenvalues whose magnitude
    exceeds ``rtol`` times the largest magnitude. Negative eigenvalues are kept
    (the caller decides whether indefiniteness is acceptable).
    """
    A = symmetrize(A)
    if A.size == 0:
        return np.zeros(0), np.zeros((A.shape[0], 0))
    vals, vecs = np.linalg.eigh(A)
    scale = np.max(np.abs(vals))
    if scale == 0.0:
        return vals[:0], vecs[:, :0]
    keep = np.abs(vals) > rtol * scale
    return vals[keep], vecs[:, keep]


def spectral_pinv(A, rtol=PINV_RTOL):
    """Pseudo-inverse of a symmetric matrix via its eigendecomposition."""
    vals, vecs = spectral_decomposition(A, rtol)
    return (vecs / vals) @ vecs.T


def pinv_sqrt(W, tol=PINV_RTOL):
    """Square root of the pseudo-inverse of a symmetric PSD matrix.

    Eigenvalues below ``tol * lambda_max`` are treated as zero. Negative
    eigenvalues larger in magnitude than that are a sign the matrix is not a
    Gram matrix and raise :class:`NumericalError`.

    >>> pinv_sqrt(np.diag([4.0, 0.0]))
    array([[0.5, 0. ],
           [0. , 0. ]])
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise NumericalError(f"expected a square matrix, got shape {W.shape}")
    vals, vecs = np.linalg.eigh(symmetrize(W))
    lam_max = float(np.max(np.abs(vals))) if vals.size else 0.0
    if lam_max == 0.0:
        return np.zeros_like(W)
    cutoff = tol * lam_max
    if vals[0] < -cutoff:
        raise NumericalError(
            f"matrix is indefinite: eigenvalue {vals[0]:.6g} below -{cutoff:.3g}")
    keep = vals > cutoff
    V = vecs[:, keep]
    R = (V / np.sqrt(vals[keep])) @ V.T
    return symmetrize(R)


@dataclass(frozen=True)
class PSDReport:
    is_psd: bool
    min_eigenvalue: float


def check_psd(A, tol=1e-8):
    """Report whether ``A`` is PSD, allowing ``-tol * lambda_max`` slack."""
    vals = np.linalg.eigvalsh(symmetrize(A))
    lo = float(vals[0])
    scale = max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
    return PSDReport(is_psd=lo >= -tol * scale, min_eigenvalue=lo)
