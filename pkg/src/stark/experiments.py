"""Denoising and interpolation test harnesses built on downsampled reads.

A test starts from a deep counts matrix ``C0``; its row-normalised version
``F0`` is the reference.  Each repeat downsamples reads, optionally drops
pixels, denoises, and scores the result against ``F0``.
"""

from __future__ import annotations

import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import __version__
from .io import REPORT_FORMAT
from .metrics import CENTERING, MetricConfig, evaluate_all
from .simulate import PRNG_ID, downsample_counts, row_normalize, subsample_pixels
from .solver import autotune, evaluate, fit, simplex_threshold


@dataclass
class RunConfig:
    """Everything a test run needs besides the data itself."""

    variant: str = "adaptive"
    reads_total: int | None = None
    reads_per_pixel_target: float | None = None
    pixels_keep: float | None = None
    n_iter: int = 7
    alpha: float | None = None
    omega_rel: float = 6.0
    p_target: float = 0.7
    seed: int = 0
    repeats: int = 1
    workers: int = 1
    metrics: MetricConfig = field(default_factory=MetricConfig)

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def resolve_reads(self, m: int, total: int) -> int:
        if self.reads_total is not None:
            R = int(self.reads_total)
        elif self.reads_per_pixel_target is not None:
            R = int(round(self.reads_per_pixel_target * m))
        else:
            R = total
        if not 0 <= R <= total:
            raise ValueError(f"requested {R} reads but the counts matrix holds {total}")
        return R

    def resolve_keep(self, m: int) -> int:
        k = self.pixels_keep
        if k is None:
            return m
        n = int(round(k * m)) if k <= 1 else int(k)
        if not 1 <= n <= m:
            raise ValueError(f"pixels_keep={k} resolves to {n}, outside [1, {m}]")
        return n

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "reads_total": self.reads_total,
            "reads_per_pixel_target": self.reads_per_pixel_target,
            "pixels_keep": self.pixels_keep,
            "n_iter": self.n_iter,
            "alpha": self.alpha,
            "omega_rel": self.omega_rel,
            "p_target": self.p_target,
            "seed": self.seed,
            "repeats": self.repeats,
            "metrics": vars(self.metrics).copy(),
        }


def provenance(cfg: RunConfig) -> dict:
    return {
        "format": REPORT_FORMAT,
        "package_version": __version__,
        "prng": PRNG_ID,
        "master_seed": cfg.seed,
        "repeat_seeds": [[cfg.seed, r] for r in range(cfg.repeats)],
        "numpy": np.__version__,
        "python": platform.python_version(),
        "metric_centering": CENTERING,
    }


def denoise(Y, reads, pixels, cfg: RunConfig, F_star=None):
    hp = autotune(
        Y, reads, pixels,
        alpha=cfg.alpha, omega_rel=cfg.omega_rel, p_target=cfg.p_target, n_iter=cfg.n_iter,
    )
    return fit(Y, pixels, hp, cfg.variant, F_star=F_star)


def run_repeat(C0, F0, pixels, labels, cfg: RunConfig, r: int) -> dict:
    """One repeat of the denoising (or, with ``pixels_keep``, interpolation) test."""
    m = C0.shape[0]
    R = cfg.resolve_reads(m, int(C0.sum()))
    C_ds = downsample_counts(C0, R, seed=(cfg.seed, r, 0))
    Y = np.asarray(row_normalize(C_ds).toarray() if sp.issparse(C_ds) else row_normalize(C_ds))
    reads = np.asarray(C_ds.sum(axis=1)).ravel()
    n_keep = cfg.resolve_keep(m)
    Y_fit, P_fit, idx = subsample_pixels(Y, pixels, n_keep, seed=(cfg.seed, r, 1))
    F_ref = F0[idx] if cfg.variant == "oracle" else None
    model = denoise(Y_fit, reads[idx], P_fit, cfg, F_star=F_ref)
    raw = model.fitted if n_keep == m else evaluate(model, pixels)
    F_bar, n_degenerate = simplex_threshold(raw, return_count=True)

    out = {
        "repeat": r,
        "reads": R,
        "pixels_kept": n_keep,
        "metrics": evaluate_all(F0, F_bar, labels, cfg.metrics).to_dict(),
        "hyperparameters": model.hyperparameters.to_dict(),
        "trace": model.trace.to_dict(),
        "degenerate_rows": n_degenerate,
    }
    if n_keep == m:
        out["noisy_input_metrics"] = evaluate_all(F0, Y, labels, cfg.metrics).to_dict()
    out["_F_bar"] = F_bar
    return out


def aggregate(values) -> dict:
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None}
    arr = np.asarray(vals, dtype=float)
    return {"mean": float(np.mean(arr)), "std": float(np.std(arr))}


def run_test(C0, pixels, labels, cfg: RunConfig, kind: str = "denoise") -> tuple[dict, np.ndarray]:
    """Run all repeats and return ``(report, F_bar_of_first_repeat)``."""
    C0 = sp.csr_matrix(C0)
    F0 = np.asarray(row_normalize(C0).toarray())

    def job(r):
        return run_repeat(C0, F0, pixels, labels, cfg, r)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(job, range(cfg.repeats)))
    else:
        results = [job(r) for r in range(cfg.repeats)]
    first = results[0].pop("_F_bar")
    for res in results[1:]:
        res.pop("_F_bar")

    summary = {}
    for key in ("label_transfer_accuracy", "knn_overlap", "relative_error"):
        summary[key] = aggregate(res["metrics"][key] for res in results)
    report = {
        "kind": f"{kind}-test",
        "config": cfg.to_dict(),
        "shape": list(C0.shape),
        "total_reads": int(C0.sum()),
        "repeats": results,
        "summary": summary,
        "provenance": provenance(cfg),
    }
    return report, first
