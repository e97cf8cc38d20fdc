"""Synthetic ground truth, sequencing noise, read downsampling and pixel
subsampling.

All randomness flows through :func:`make_rng`, which wraps numpy's
counter-based Philox bit generator keyed by a ``SeedSequence``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

PRNG_ID = "numpy.random.Philox(SeedSequence)"


def make_rng(seed, *spawn_key: int) -> np.random.Generator:
    """Generator for ``seed``, optionally for the child stream ``spawn_key``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(spawn_key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SyntheticImage:
    pixels: np.ndarray
    F_star: np.ndarray
    labels: np.ndarray
    profiles: np.ndarray


def grid_pixels(width: int, height: int) -> np.ndarray:
    xs, ys = np.meshgrid(np.arange(width, dtype=float), np.arange(height, dtype=float))
    return np.column_stack([xs.ravel(), ys.ravel()])


def make_synthetic(
    width: int,
    height: int,
    d: int,
    regions: int = 2,
    sharpness: float = 2.0,
    seed=0,
    concentration: float = 1.0,
) -> SyntheticImage:
    """Piecewise-smooth expression image on a ``width x height`` grid.

    Region centres are drawn uniformly in the grid and each region gets a
    Dirichlet profile.  A pixel mixes the profiles with softmax weights
    ``exp(-sharpness * dist_to_centre)``, so two neighbouring regions meet in a
    logistic transition of width ``1 / sharpness``.  Labels are the nearest
    centre.
    """
    if not 1 <= regions <= d:
        raise ValueError(f"need 1 <= regions <= d, got regions={regions}, d={d}")
    rng = make_rng(seed)
    pixels = grid_pixels(width, height)
    hi = np.array([width - 1, height - 1], dtype=float)
    centres = rng.uniform(0, 1, size=(regions, 2)) * hi
    profiles = rng.dirichlet(np.full(d, concentration), size=regions)
    dist = np.linalg.norm(pixels[:, None, :] - centres[None, :, :], axis=2)
    logits = -sharpness * dist
    logits -= logits.max(axis=1, keepdims=True)
    mix = np.exp(logits)
    mix /= mix.sum(axis=1, keepdims=True)
    F = mix @ profiles
    F /= F.sum(axis=1, keepdims=True)
    labels = np.argmin(dist, axis=1)
    return SyntheticImage(pixels, F, labels, profiles)


def sample_reads(
    total_reads: int,
    m: int | None = None,
    u=None,
    family: str = "multinomial",
    seed=0,
) -> np.ndarray:
    """Per-pixel read counts.

    Multinomial(R, u) for ``family="multinomial"``, independent Poisson(u_i R)
    for ``family="poisson"``.  ``u`` defaults to uniform over ``m`` pixels.
    """
    if u is None:
        if m is None:
            raise ValueError("give either m or u")
        u = np.full(m, 1.0 / m)
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or abs(u.sum() - 1.0) > 1e-12:
        raise ValueError("u must be a probability vector")
    if total_reads < 0:
        raise ValueError("total_reads must be >= 0")
    rng = make_rng(seed)
    if family == "multinomial":
        return rng.multinomial(int(total_reads), u).astype(np.int64)
    if family == "poisson":
        return rng.poisson(u * total_reads).astype(np.int64)
    raise ValueError(f"unknown family {family!r}")


def sample_counts(F_star: np.ndarray, reads, seed=0) -> np.ndarray:
    """Integer counts: row i is a Multinomial(R_i, F_star[i]) draw."""
    F = np.asarray(F_star, dtype=float)
    R = np.asarray(reads, dtype=np.int64)
    if np.any(F < -1e-9) or np.any(np.abs(F.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("rows of F_star must lie in the simplex")
    if R.shape != (F.shape[0],) or np.any(R < 0):
        raise ValueError("reads must be a nonnegative vector with one entry per row")
    P = np.clip(F, 0.0, None)
    P /= P.sum(axis=1, keepdims=True)
    return make_rng(seed).multinomial(R, P).astype(np.int64)


def sample_expression(F_star: np.ndarray, reads, seed=0) -> np.ndarray:
    """Empirical frequencies of ``R_i`` draws from each row; zero row if R_i = 0."""
    return row_normalize(sample_counts(F_star, reads, seed))


def row_normalize(C):
    """Scale rows to sum to one; all-zero rows stay zero.  Sparse in, sparse out."""
    if sp.issparse(C):
        C = sp.csr_matrix(C, dtype=float)
        s = np.asarray(C.sum(axis=1)).ravel()
        inv = np.divide(1.0, s, out=np.zeros_like(s), where=s > 0)
        return sp.csr_matrix(sp.diags(inv) @ C)
    C = np.asarray(C, dtype=float)
    s = C.sum(axis=1, keepdims=True)
    return np.divide(C, s, out=np.zeros_like(C), where=s > 0)


def downsample_counts(C0, R: int, seed=0):
    """Keep ``R`` reads of ``C0`` uniformly at random without replacement.

    The entries follow the multivariate hypergeometric law over the nonzero
    entries of ``C0`` (row-major order).  Returns the same kind of matrix as
    given (dense or CSR).
    """
    is_sparse = sp.issparse(C0)
    C = sp.csr_matrix(C0) if is_sparse else np.asarray(C0)
    data = C.data if is_sparse else C.ravel()
    if np.any(data < 0):
        raise ValueError("counts must be nonnegative")
    data = np.asarray(data, dtype=np.int64)
    total = int(data.sum())
    if not 0 <= R <= total:
        raise ValueError(f"R={R} must lie in [0, {total}]")
    rng = make_rng(seed)
    if R == total:
        kept = data.copy()
    elif R == 0:
        kept = np.zeros_like(data)
    else:
        kept = rng.multivariate_hypergeometric(data, int(R), method="marginals")
    if is_sparse:
        out = sp.csr_matrix((kept, C.indices.copy(), C.indptr.copy()), shape=C.shape)
        out.eliminate_zeros()
        return out
    return kept.reshape(C.shape)


def subsample_pixels(Y, pixels, m_tilde: int, seed=0):
    """Uniform random subset of ``m_tilde`` pixels, kept in original order.

    Returns ``(Y_sub, pixels_sub, index)``.
    """
    m = np.asarray(pixels).shape[0]
    if not 1 <= m_tilde <= m:
        raise ValueError(f"m_tilde={m_tilde} must lie in [1, {m}]")
    if m_tilde == m:
        idx = np.arange(m)
    else:
        idx = np.sort(make_rng(seed).choice(m, size=m_tilde, replace=False))
    return Y[idx], np.asarray(pixels)[idx], idx
