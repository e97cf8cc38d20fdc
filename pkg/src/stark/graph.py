"""Threshold graphs on pixels, row-stochastic edge weights and the effective
graph Laplacian.

Edge sets always contain the self-loops ``(i, i)``.  Weights are stored as one
value per edge, aligned with the edge arrays of the owning :class:`EdgeSet`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

EXP_FLOOR = -700.0
ROW_SUM_TOL = 1e-8


@dataclass(frozen=True)
class EdgeSet:
    """Directed edges ``(i, k)`` with ``|q_i - q_k| <= tau``, row-major order."""

    tau: float
    m: int
    rows: np.ndarray
    cols: np.ndarray
    sqdist: np.ndarray  # squared pixel distance of each edge
    indptr: np.ndarray  # CSR-style row offsets into rows/cols

    @property
    def n_edges(self) -> int:
        return self.rows.size

    def neighbors(self, i: int) -> np.ndarray:
        return self.cols[self.indptr[i] : self.indptr[i + 1]]

    def row_sum(self, values: np.ndarray) -> np.ndarray:
        return np.bincount(self.rows, weights=values, minlength=self.m)


@dataclass(frozen=True)
class WeightMatrix:
    edges: EdgeSet
    values: np.ndarray

    @property
    def m(self) -> int:
        return self.edges.m

    def to_sparse(self) -> sp.csr_matrix:
        e = self.edges
        return sp.csr_matrix((self.values, e.cols, e.indptr), shape=(e.m, e.m))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


def build_edge_set(pixels, tau: float) -> EdgeSet:
    P = np.asarray(pixels, dtype=float)
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    m = P.shape[0]
    tree = cKDTree(P)
    # candidate pairs from the tree, then an exact recheck with <=
    pairs = tree.query_pairs(tau * (1 + 1e-12) + 1e-300, output_type="ndarray")
    if pairs.size:
        diff = P[pairs[:, 0]] - P[pairs[:, 1]]
        d2 = np.einsum("ij,ij->i", diff, diff)
        ok = np.sqrt(d2) <= tau
        pairs, d2 = pairs[ok], d2[ok]
    else:
        pairs, d2 = np.empty((0, 2), dtype=np.intp), np.empty(0)
    rows = np.concatenate([np.arange(m), pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([np.arange(m), pairs[:, 1], pairs[:, 0]])
    sq = np.concatenate([np.zeros(m), d2, d2])
    order = np.lexsort((cols, rows))
    rows, cols, sq = rows[order], cols[order], sq[order]
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=m))])
    return EdgeSet(float(tau), m, rows, cols, sq, indptr)


def _row_normalize_exponent(edges: EdgeSet, exponent: np.ndarray) -> WeightMatrix:
    w = np.exp(np.maximum(exponent, EXP_FLOOR))
    return WeightMatrix(edges, w / edges.row_sum(w)[edges.rows])


def spatial_weights(edges: EdgeSet, s2: float) -> WeightMatrix:
    """Row-normalised Gaussian weights on pixel distance alone."""
    if not s2 > 0:
        raise ValueError(f"s2 must be > 0, got {s2}")
    return _row_normalize_exponent(edges, -edges.sqdist / s2**2)


def update_weights(F_values: np.ndarray, edges: EdgeSet, s1: float, s2: float) -> WeightMatrix:
    """Minimiser over row-stochastic weights of the weight-dependent objective.

    Gaussian weights in both expression distance (scale ``s1``) and pixel
    distance (scale ``s2``), restricted to the edge set and normalised per row.
    """
    if not (s1 > 0 and s2 > 0):
        raise ValueError(f"s1 and s2 must be > 0, got {s1}, {s2}")
    F = np.asarray(F_values, dtype=float)
    diff = F[edges.cols] - F[edges.rows]
    fdist = np.einsum("ij,ij->i", diff, diff)
    return _row_normalize_exponent(edges, -fdist / s1**2 - edges.sqdist / s2**2)


def check_stochastic(W: WeightMatrix, tol: float = ROW_SUM_TOL) -> None:
    if np.any(W.values < 0):
        raise ValueError("weights must be nonnegative")
    sums = W.edges.row_sum(W.values)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ValueError(f"row {i} of W sums to {sums[i]!r}, expected 1")


def effective_laplacian(W: WeightMatrix) -> sp.csr_matrix:
    """``(I + diag(W^T e)) / 2 - (W + W^T) / 2`` as a sparse symmetric matrix."""
    check_stochastic(W)
    Ws = W.to_sparse()
    col_sums = np.asarray(Ws.sum(axis=0)).ravel()
    L = 0.5 * sp.diags(1.0 + col_sums) - 0.5 * (Ws + Ws.T)
    return sp.csr_matrix(L)


def laplacian_quadratic(W: WeightMatrix, F: np.ndarray) -> float:
    """``(1/2m) sum_{(i,k)} W_ik |F_k - F_i|^2`` as an explicit edge sum."""
    e = W.edges
    diff = F[e.cols] - F[e.rows]
    return float(np.dot(W.values, np.einsum("ij,ij->i", diff, diff)) / (2 * e.m))


def graph_entropy(W: WeightMatrix, s1: float, s2: float) -> float:
    """Entropy term of the objective, with ``0 log 0 = 0``."""
    v = W.values
    if np.any(v < 0):
        raise ValueError("weights must be nonnegative")
    xlogx = np.zeros_like(v)
    pos = v > 0
    xlogx[pos] = v[pos] * np.log(v[pos])
    total = s1**2 * (xlogx - v).sum() + (s1**2 / s2**2) * np.dot(v, W.edges.sqdist)
    return float(total / (2 * W.m))
