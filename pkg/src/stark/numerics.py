"""Shared dense linear algebra and neighbour search.

Everything here is a pure function on numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import NotPSDError

SYMMETRY_TOL = 1e-10
PINV_REL_TOL = 1e-10
PSD_SLACK = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues in descending order."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


@dataclass(frozen=True)
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray  # shape (r, d), rows orthonormal
    explained_variance: np.ndarray

    @property
    def r(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]


def check_symmetric(M: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    gap = np.abs(M - M.T)
    scale = np.maximum(np.abs(M), np.abs(M.T))
    bad = gap > tol * np.maximum(scale, 1.0)
    if np.any(bad):
        i, k = np.argwhere(bad)[0]
        raise ValueError(
            f"matrix is not symmetric: |M[{i},{k}] - M[{k},{i}]| = {gap[i, k]:.3e}"
        )
    return M


def eig_sym(M: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix.

    Eigenvalues are returned in descending order.  Raises ``ValueError`` if
    ``M`` is not symmetric within tolerance.
    """
    M = check_symmetric(M)
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    return EigenDecomposition(w[::-1].copy(), V[:, ::-1].copy())


def psd_pinv_apply(
    M: np.ndarray | EigenDecomposition,
    B: np.ndarray,
    rel_tol: float = PINV_REL_TOL,
) -> np.ndarray:
    """Apply the Moore-Penrose pseudoinverse of a PSD matrix to ``B``.

    Eigenvalues at or below ``rel_tol * lambda_max`` are treated as zero, so the
    result always lies in the range of ``M``.

    Parameters
    ----------
    M : ndarray or EigenDecomposition
        Symmetric positive semidefinite matrix, or its decomposition.
    B : ndarray
        Right-hand side, vector or matrix with ``M.shape[0]`` rows.
    rel_tol : float
        Relative eigenvalue cutoff.

    Raises
    ------
    NotPSDError
        If an eigenvalue is below ``-PSD_SLACK * lambda_max``.
    """
    eig = M if isinstance(M, EigenDecomposition) else eig_sym(M)
    w, V = eig.eigenvalues, eig.eigenvectors
    lam_max = max(float(w[0]), 0.0) if w.size else 0.0
    if w.size and w[-1] < -PSD_SLACK * lam_max:
        raise NotPSDError(
            f"matrix is not positive semidefinite: eigenvalue {w[-1]:.3e} "
            f"(largest {lam_max:.3e})"
        )
    keep = w > rel_tol * lam_max
    if lam_max == 0.0:
        keep[:] = False
    Vk = V[:, keep]
    B = np.asarray(B, dtype=float)
    return Vk @ ((Vk.T @ B) / (w[keep] if B.ndim == 1 else w[keep][:, None]))


def pca_fit(X: np.ndarray, r: int) -> PcaBasis:
    """Fit a rank-``r`` PCA basis by thin SVD of the column-centred matrix.

    Each component is sign-normalised so its largest-magnitude entry is
    positive.
    """
    X = np.asarray(X, dtype=float)
    m, d = X.shape
    if not 1 <= r <= min(m, d):
        raise ValueError(f"r={r} must lie in [1, min(m, d)] = [1, {min(m, d)}]")
    mean = X.mean(axis=0)
    _, s, Vt = np.linalg.svd(X - mean, full_matrices=False)
    comps = Vt[:r].copy()
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(r), pivot])
    signs[signs == 0] = 1.0
    comps *= signs[:, None]
    var = s[:r] ** 2 / max(m - 1, 1)
    return PcaBasis(mean=mean, components=comps, explained_variance=var)


def pca_project(basis: PcaBasis, X: np.ndarray) -> np.ndarray:
    """Scores of the rows of ``X`` relative to ``basis.mean``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != basis.d:
        raise ValueError(f"expected {basis.d} columns, got shape {X.shape}")
    return (X - basis.mean) @ basis.components.T


def knn_search(
    points: np.ndarray,
    queries: np.ndarray | None,
    k: int,
    chunk: int = 1024,
) -> np.ndarray:
    """Exact k-nearest-neighbour indices by brute force.

    Passing ``queries=None`` searches ``points`` against itself with the
    self-match excluded.  Ties in distance go to the smaller index.

    Returns
    -------
    ndarray of shape (n_queries, k)
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    self_query = queries is None
    Q = points if self_query else np.asarray(queries, dtype=float)
    if Q.ndim == 1:
        Q = Q[:, None]
    n = points.shape[0]
    available = n - 1 if self_query else n
    if k < 1 or k > available:
        raise ValueError(f"k={k} must lie in [1, {available}]")

    out = np.empty((Q.shape[0], k), dtype=np.intp)
    for start in range(0, Q.shape[0], chunk):
        D = cdist(Q[start : start + chunk], points)
        if self_query:
            rows = np.arange(D.shape[0])
            D[rows, start + rows] = np.inf
        # stable sort keeps index order among equal distances
        order = np.argsort(D, axis=1, kind="stable")
        out[start : start + chunk] = order[:, :k]
    return out
