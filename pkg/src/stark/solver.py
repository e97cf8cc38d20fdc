"""Block coordinate descent for kernel ridge regression with an adaptive
graph-Laplacian regulariser.

The coefficient matrix ``theta`` (m x d) represents the function
``F(q) = m**-0.5 * sum_i kernel(q_i, q) theta_i``; its values at the pixels are
``sqrt(m) K theta`` where ``K`` is the kernel matrix scaled by ``1/m``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import NotPSDError, NumericalError
from .graph import (
    EdgeSet,
    WeightMatrix,
    build_edge_set,
    effective_laplacian,
    graph_entropy,
    spatial_weights,
    update_weights,
)
from .kernel import KernelConfig, auto_length_scale, cross_kernel, kernel_matrix
from .numerics import PINV_REL_TOL, EigenDecomposition, eig_sym, psd_pinv_apply

logger = logging.getLogger(__name__)

VARIANTS = ("adaptive", "spatial", "oracle")


@dataclass(frozen=True)
class Hyperparameters:
    """Resolved hyperparameters of one fit.

    ``lam = alpha * lam_rel`` and ``omega = alpha * omega_rel`` when they come
    from :func:`autotune`; a hand-built instance may set ``lam`` and ``omega``
    directly.  ``s1`` is only needed by the adaptive and oracle variants.
    """

    length_scale: float
    s2: float
    tau: float
    lam: float
    omega: float
    s1: float | None = None
    n_iter: int = 7
    p_target: float = 0.7
    alpha: float | None = None
    lam_rel: float | None = None
    omega_rel: float | None = None
    kernel_family: str = "exponential"
    nu: float = 0.5

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if not self.omega >= 0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        if not (self.tau > 0 and self.s2 > 0 and self.length_scale > 0):
            raise ValueError("length_scale, s2 and tau must be > 0")
        if self.s1 is not None and not self.s1 > 0:
            raise ValueError(f"s1 must be > 0, got {self.s1}")
        if self.n_iter < 1:
            raise ValueError(f"n_iter must be >= 1, got {self.n_iter}")
        if not 0 < self.p_target < 1:
            raise ValueError(f"p_target must lie in (0, 1), got {self.p_target}")

    @property
    def kernel(self) -> KernelConfig:
        return KernelConfig(self.length_scale, self.kernel_family, self.nu)

    def to_dict(self) -> dict:
        return asdict(self)


class KernelSystem:
    """Kernel matrix of a pixel set plus its cached eigendecomposition.

    The theta-update is solved on the range of ``K``: with ``K = V S V^T``
    restricted to eigenvalues above the pseudoinverse cutoff, the minimiser is
    ``theta = V S^{-1/2} c`` where
    ``(S + lam I + omega S^{1/2} V^T L V S^{1/2}) c = S^{1/2} V^T Y / sqrt(m)``.
    This is the pseudoinverse formula rescaled so the system is bounded below
    by ``lam``.
    """

    def __init__(self, pixels, cfg: KernelConfig, rel_tol: float = PINV_REL_TOL):
        self.pixels = np.asarray(pixels, dtype=float)
        self.cfg = cfg
        self.K = kernel_matrix(cfg, self.pixels)
        self.m = self.K.shape[0]
        self.eig: EigenDecomposition = eig_sym(self.K)
        w = self.eig.eigenvalues
        if w[-1] < -1e-8 * w[0]:
            raise NotPSDError(f"kernel matrix is not PSD: eigenvalue {w[-1]:.3e}")
        keep = w > rel_tol * w[0]
        self.V = self.eig.eigenvectors[:, keep]
        self.s = w[keep]
        self.sqrt_s = np.sqrt(self.s)

    @property
    def op_norm(self) -> float:
        return float(self.eig.eigenvalues[0])

    def solve(self, Y: np.ndarray, lam: float, omega: float, W: WeightMatrix | None):
        """Return ``(theta, F)`` minimising the objective in theta for fixed W."""
        VtY = self.V.T @ Y
        rhs = self.sqrt_s[:, None] * VtY / math.sqrt(self.m)
        N = np.diag(self.s + lam)
        if omega > 0 and W is not None:
            L = effective_laplacian(W)
            LV = np.asarray(L @ self.V)
            N += omega * (self.sqrt_s[:, None] * (self.V.T @ LV) * self.sqrt_s[None, :])
            N = 0.5 * (N + N.T)
        c = psd_pinv_apply(N, rhs)
        theta = self.V @ (c / self.sqrt_s[:, None])
        F = math.sqrt(self.m) * (self.V @ (self.sqrt_s[:, None] * c))
        return theta, F

    def values(self, theta: np.ndarray) -> np.ndarray:
        return math.sqrt(self.m) * (self.K @ theta)


@dataclass
class FitTrace:
    """Per-iteration record.

    ``objective[t]`` is the objective at ``(theta^{t+1}, W^{t+1})`` and
    ``objective_half[t]`` at ``(theta^{t+1}, W^t)``; ``step_norm`` holds the
    RKHS distances ``|F^{t+1} - F^t|`` for ``t = 1 .. N-1`` (empty for one-shot
    variants).
    """

    objective: list = field(default_factory=list)
    objective_half: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)

    def interleaved(self) -> list:
        out = []
        for half, full in zip(self.objective_half, self.objective):
            out += [half, full]
        return out

    def to_dict(self) -> dict:
        return {
            "objective": list(map(float, self.objective)),
            "objective_half": list(map(float, self.objective_half)),
            "step_norm": list(map(float, self.step_norm)),
        }


@dataclass(frozen=True)
class DenoisedModel:
    theta: np.ndarray
    pixels: np.ndarray
    kernel: KernelConfig
    weights: WeightMatrix
    hyperparameters: Hyperparameters
    variant: str
    trace: FitTrace
    fitted: np.ndarray  # values at the training pixels

    def __call__(self, queries) -> np.ndarray:
        return evaluate(self, queries)


def _check_Y(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError(f"Y must be a 2-d matrix, got shape {Y.shape}")
    return Y


def objective(
    theta: np.ndarray,
    W: WeightMatrix,
    Y: np.ndarray,
    K: np.ndarray,
    hp: Hyperparameters,
) -> float:
    """Finite-dimensional objective in ``(theta, W)``."""
    Y = _check_Y(Y)
    theta = np.asarray(theta, dtype=float)
    m = K.shape[0]
    if theta.shape != Y.shape or K.shape != (m, m) or Y.shape[0] != m or W.m != m:
        raise ValueError(
            f"shape mismatch: theta {theta.shape}, Y {Y.shape}, K {K.shape}, W m={W.m}"
        )
    Ktheta = K @ theta
    fit = np.sum((Y - math.sqrt(m) * Ktheta) ** 2) / m
    ridge = hp.lam * np.sum(theta * Ktheta)
    total = fit + ridge
    if hp.omega > 0:
        if hp.s1 is None:
            raise ValueError("objective with omega > 0 needs s1")
        L = effective_laplacian(W)
        lap = np.sum(Ktheta * (L @ Ktheta))
        total += hp.omega * (lap + graph_entropy(W, hp.s1, hp.s2))
    return float(total)


def objective_gradient(theta, W, Y, K, hp) -> np.ndarray:
    """Gradient of :func:`objective` in theta (lies in the range of K)."""
    m = K.shape[0]
    Ktheta = K @ theta
    G = K @ Ktheta + hp.lam * Ktheta - K @ Y / math.sqrt(m)
    if hp.omega > 0:
        G = G + hp.omega * (K @ (effective_laplacian(W) @ Ktheta))
    return 2.0 * G


def theta_update(
    Y: np.ndarray,
    system: KernelSystem,
    W: WeightMatrix,
    hp: Hyperparameters,
) -> np.ndarray:
    """Exact minimiser of the objective over theta in the range of K."""
    theta, _ = system.solve(_check_Y(Y), hp.lam, hp.omega, W)
    return theta


def _rkhs_step(system: KernelSystem, dtheta: np.ndarray) -> float:
    return math.sqrt(max(float(np.sum(dtheta * (system.K @ dtheta))), 0.0))


def fit(
    Y: np.ndarray,
    pixels,
    hp: Hyperparameters,
    variant: str = "adaptive",
    F_star: np.ndarray | None = None,
    system: KernelSystem | None = None,
    edges: EdgeSet | None = None,
) -> DenoisedModel:
    """Fit the denoiser.

    ``"adaptive"`` alternates exact theta- and W-updates for ``hp.n_iter``
    rounds starting from spatial weights; ``"spatial"`` stops after the first
    theta-update; ``"oracle"`` builds weights once from ``F_star`` and solves
    a single theta-update.

    Parameters
    ----------
    Y : ndarray (m, d)
        Noisy expression, rows nonnegative (zero rows allowed).
    pixels : ndarray (m, 2)
    hp : Hyperparameters
    variant : {"adaptive", "spatial", "oracle"}
    F_star : ndarray (m, d), optional
        Ground truth, required by the oracle variant.
    system, edges : optional
        Precomputed kernel system / edge set for the same pixels and
        hyperparameters.
    """
    Y = _check_Y(Y)
    if np.any(Y < 0):
        raise ValueError("Y must be nonnegative")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if hp.n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    if system is None:
        system = KernelSystem(pixels, hp.kernel)
    if edges is None:
        edges = build_edge_set(system.pixels, hp.tau)
    if Y.shape[0] != system.m:
        raise ValueError(f"Y has {Y.shape[0]} rows but there are {system.m} pixels")
    if variant in ("adaptive", "oracle") and hp.omega > 0 and hp.s1 is None:
        raise ValueError(f"variant {variant!r} needs s1")

    trace = FitTrace()
    K = system.K

    if variant == "oracle":
        if F_star is None:
            raise ValueError("oracle variant needs F_star")
        W = update_weights(F_star, edges, hp.s1, hp.s2)
        theta, F = system.solve(Y, hp.lam, hp.omega, W)
        J = objective(theta, W, Y, K, hp)
        trace.objective_half.append(J)
        trace.objective.append(J)
        return DenoisedModel(theta, system.pixels, hp.kernel, W, hp, variant, trace, F)

    W = spatial_weights(edges, hp.s2)
    theta_prev = None
    n_iter = 1 if variant == "spatial" else hp.n_iter
    for _ in range(n_iter):
        theta, F = system.solve(Y, hp.lam, hp.omega, W)
        trace.objective_half.append(objective(theta, W, Y, K, hp))
        if theta_prev is not None:
            trace.step_norm.append(_rkhs_step(system, theta - theta_prev))
        if variant == "adaptive" and hp.omega > 0:
            W = update_weights(F, edges, hp.s1, hp.s2)
        trace.objective.append(objective(theta, W, Y, K, hp))
        theta_prev = theta
    return DenoisedModel(theta, system.pixels, hp.kernel, W, hp, variant, trace, F)


def evaluate(model: DenoisedModel, queries) -> np.ndarray:
    """Evaluate the fitted function at arbitrary planar points (no thresholding)."""
    Q = np.atleast_2d(np.asarray(queries, dtype=float))
    m = model.pixels.shape[0]
    return cross_kernel(model.kernel, model.pixels, Q) @ model.theta / math.sqrt(m)


def simplex_threshold(X: np.ndarray, return_count: bool = False):
    """Map rows to the simplex by ``x -> max(x, 0) / |max(x, 0)|_1``.

    Rows with no positive entry become the uniform vector; their number is
    logged and returned when ``return_count`` is set.
    """
    X = np.clip(np.asarray(X, dtype=float), 0.0, None)
    sums = X.sum(axis=1)
    dead = sums <= 0
    out = np.empty_like(X)
    out[~dead] = X[~dead] / sums[~dead, None]
    out[dead] = 1.0 / X.shape[1]
    n_dead = int(dead.sum())
    if n_dead:
        logger.warning("simplex_threshold: %d rows had no positive entry", n_dead)
    return (out, n_dead) if return_count else out


def fit_residual(Y: np.ndarray, F: np.ndarray) -> float:
    """Mean squared row residual ``(1/m) sum_i |Y_i - F_i|^2``."""
    return float(np.sum((Y - F) ** 2) / Y.shape[0])


def target_fit(reads) -> float:
    """``(1/m) sum_i min(1/R_i, 1)`` with zero-read pixels contributing 1."""
    R = np.asarray(reads, dtype=float)
    with np.errstate(divide="ignore"):
        inv = np.where(R >= 1, 1.0 / np.maximum(R, 1), 1.0)
    return float(np.mean(np.minimum(inv, 1.0)))


class AutotuneError(NumericalError):
    pass


def autotune(
    Y: np.ndarray,
    reads,
    pixels,
    target_neighbors: float = 7,
    p_target: float = 0.7,
    omega_rel: float = 6.0,
    n_iter: int = 7,
    s1_quantile: float = 0.75,
    tau_ratio: float = 1.5,
    alpha: float | None = None,
    length_scale: float | None = None,
    s1: float | None = None,
    kernel_family: str = "exponential",
    nu: float = 0.5,
    bracket: tuple = (1e-6, 1e6),
    max_expand: int = 3,
    max_bisect: int = 60,
    rel_tol: float = 1e-3,
    system: KernelSystem | None = None,
) -> Hyperparameters:
    """Resolve every hyperparameter from the data.

    The length scale gives ``target_neighbors`` neighbours on average; ``s2``
    equals it and ``tau = tau_ratio * length_scale``.  The overall strength
    ``alpha`` is found by bisection in log-space so that the residual of the
    spatial fit is ``p_target`` times the expected noise level
    ``(1/m) sum min(1/R_i, 1)``.  ``s1`` is the ``s1_quantile`` quantile of
    expression distances of the spatial fit across non-loop edges.  Any
    keyword given explicitly overrides its heuristic.
    """
    Y = _check_Y(Y)
    P = np.asarray(pixels, dtype=float)
    if length_scale is None:
        length_scale = auto_length_scale(P, target_neighbors)
    cfg = KernelConfig(length_scale, kernel_family, nu)
    if system is None:
        system = KernelSystem(P, cfg)
    lam_rel = system.op_norm
    tau = tau_ratio * length_scale
    s2 = length_scale
    edges = build_edge_set(P, tau)
    W0 = spatial_weights(edges, s2)

    def spatial_fit(a):
        _, F = system.solve(Y, a * lam_rel, a * omega_rel, W0)
        return F

    if alpha is None:
        goal = p_target * target_fit(reads)

        def gap(a):
            return fit_residual(Y, spatial_fit(a)) - goal

        lo, hi = bracket
        g_lo, g_hi = gap(lo), gap(hi)
        for _ in range(max_expand):
            if g_lo <= 0:
                break
            lo /= 10.0
            g_lo = gap(lo)
        for _ in range(max_expand):
            if g_hi >= 0:
                break
            hi *= 10.0
            g_hi = gap(hi)
        if not (g_lo <= 0 <= g_hi):
            raise AutotuneError(
                f"alpha bracket [{lo:.1e}, {hi:.1e}] does not straddle the target "
                f"fit {goal:.4e}: achieved fit range "
                f"[{g_lo + goal:.4e}, {g_hi + goal:.4e}]"
            )
        log_lo, log_hi = math.log(lo), math.log(hi)
        alpha = math.exp(0.5 * (log_lo + log_hi))
        for _ in range(max_bisect):
            alpha = math.exp(0.5 * (log_lo + log_hi))
            g = gap(alpha)
            if abs(g) <= rel_tol * goal:
                break
            if g < 0:
                log_lo = math.log(alpha)
            else:
                log_hi = math.log(alpha)
        logger.info("autotune: alpha=%.4e (fit gap %.2e)", alpha, g)

    if s1 is None:
        F1 = spatial_fit(alpha)
        off = edges.rows != edges.cols
        diff = F1[edges.cols[off]] - F1[edges.rows[off]]
        dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        s1 = float(np.quantile(dists, s1_quantile)) if dists.size else 0.0
        if not s1 > 0:
            # constant spatial fit: any scale gives uniform expression weights
            s1 = 1.0

    return Hyperparameters(
        length_scale=float(length_scale),
        s2=float(s2),
        tau=float(tau),
        lam=float(alpha * lam_rel),
        omega=float(alpha * omega_rel),
        s1=float(s1),
        n_iter=int(n_iter),
        p_target=float(p_target),
        alpha=float(alpha),
        lam_rel=float(lam_rel),
        omega_rel=float(omega_rel),
        kernel_family=kernel_family,
        nu=float(nu),
    )


def with_alpha(hp: Hyperparameters, alpha: float) -> Hyperparameters:
    """Same hyperparameters with a different overall strength."""
    return replace(hp, alpha=alpha, lam=alpha * hp.lam_rel, omega=alpha * hp.omega_rel)
