"""Isotropic kernels on the plane and the kernel matrix used by the solver."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform
from scipy.special import gamma, kv

CLOSED_FORM_NU = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class KernelConfig:
    """Kernel family and length scale.

    ``family`` is ``"exponential"`` or ``"matern"``; ``nu`` is only read for
    Matern.  Smoothness values other than 1/2, 3/2 and 5/2 go through a Bessel
    evaluation and are experimental.
    """

    length_scale: float
    family: str = "exponential"
    nu: float = 0.5

    def __post_init__(self):
        if not np.isfinite(self.length_scale) or self.length_scale <= 0:
            raise ValueError(f"length_scale must be > 0, got {self.length_scale}")
        if self.family not in ("exponential", "matern"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "matern" and not self.nu > 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")

    def profile(self, r: np.ndarray) -> np.ndarray:
        """Kernel value as a function of distance ``r``."""
        r = np.asarray(r, dtype=float)
        l = self.length_scale
        if self.family == "exponential" or self.nu == 0.5:
            return np.exp(-r / l)
        if self.nu == 1.5:
            x = np.sqrt(3.0) * r / l
            return (1.0 + x) * np.exp(-x)
        if self.nu == 2.5:
            x = np.sqrt(5.0) * r / l
            return (1.0 + x + x * x / 3.0) * np.exp(-x)
        return _matern_bessel(r, l, self.nu)


def _matern_bessel(r, l, nu):
    warnings.warn(
        f"Matern kernel with nu={nu} uses the Bessel form (experimental)",
        stacklevel=3,
    )
    x = np.sqrt(2.0 * nu) * np.asarray(r, dtype=float) / l
    out = np.ones_like(x)
    pos = x > 0
    xp = x[pos]
    out[pos] = (2.0 ** (1.0 - nu) / gamma(nu)) * xp**nu * kv(nu, xp)
    return out


def kernel_eval(cfg: KernelConfig, q, q2) -> float:
    diff = np.asarray(q, dtype=float) - np.asarray(q2, dtype=float)
    return float(cfg.profile(np.sqrt(np.dot(diff, diff))))


def _as_pixels(pixels) -> np.ndarray:
    P = np.asarray(pixels, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2:
        raise ValueError(f"pixels must have shape (m, 2), got {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValueError("pixel coordinates must be finite")
    return P


def kernel_matrix(cfg: KernelConfig, pixels) -> np.ndarray:
    """The m x m matrix with entries ``kernel(q_i, q_k) / m``.

    Symmetric by construction (only the condensed upper triangle is evaluated).
    """
    P = _as_pixels(pixels)
    m = P.shape[0]
    if m < 1:
        raise ValueError("need at least one pixel")
    K = squareform(cfg.profile(pdist(P)))
    np.fill_diagonal(K, cfg.profile(0.0))
    return K / m


def cross_kernel(cfg: KernelConfig, pixels, queries) -> np.ndarray:
    """Unscaled kernel values between every query and every pixel."""
    return cfg.profile(cdist(np.asarray(queries, dtype=float), _as_pixels(pixels)))


def auto_length_scale(pixels, target_neighbors: float = 7, tol: float = 1e-9) -> float:
    """Radius at which a pixel has ``target_neighbors`` neighbours on average.

    A neighbour of ``q_i`` is another pixel at strictly positive distance at
    most ``l``.  The average count is a step function of ``l``; bisection
    returns the largest radius whose average does not exceed the target, to an
    absolute tolerance of ``tol`` times the largest pairwise distance.  If the
    target is never exceeded the largest pairwise distance is returned.
    """
    P = _as_pixels(pixels)
    m = P.shape[0]
    if m < 2:
        raise ValueError("need at least two pixels")
    dist = np.sort(pdist(P))
    dist = dist[dist > 0]
    if dist.size == 0:
        raise ValueError("all pixels coincide; no finite radius attains the target")

    def mean_count(radius):
        return 2.0 * np.searchsorted(dist, radius, side="right") / m

    hi = float(dist[-1])
    if mean_count(hi) <= target_neighbors:
        return hi
    lo = 0.0
    while hi - lo > tol * dist[-1]:
        mid = 0.5 * (lo + hi)
        if mean_count(mid) <= target_neighbors:
            lo = mid
        else:
            hi = mid
    return lo
