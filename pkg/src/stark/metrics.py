"""Evaluation metrics: label transfer accuracy, kNN overlap and relative error.

The two neighbourhood metrics share one preprocessing pipeline: elementwise
``log(1 + scale * t)``, per-matrix centring, then scores against principal
directions fitted on the reference matrix only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .numerics import knn_search, pca_fit, pca_project

CENTERING = "per-matrix mean"


@dataclass(frozen=True)
class MetricConfig:
    pca_components: int = 30
    classifier_k: int = 9
    overlap_k: int = 50
    log_scale: float = 1e4

    def __post_init__(self):
        for name in ("pca_components", "classifier_k", "overlap_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class MetricReport:
    label_transfer_accuracy: float | None
    knn_overlap: float
    relative_error: float

    def to_dict(self) -> dict:
        return {
            "label_transfer_accuracy": self.label_transfer_accuracy,
            "knn_overlap": self.knn_overlap,
            "relative_error": self.relative_error,
        }


def log1p_scale(X, scale: float = 1e4) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if np.any(X < 0):
        raise ValueError("log1p_scale needs nonnegative entries")
    return np.log1p(scale * X)


def shared_pca_scores(F0, F_bar, cfg: MetricConfig):
    """Scores ``(Z, Z_bar)`` of both matrices on the reference principal axes.

    The number of components is capped at ``min(m, d)``.
    """
    F0 = np.asarray(F0, dtype=float)
    F_bar = np.asarray(F_bar, dtype=float)
    if F0.shape != F_bar.shape:
        raise ValueError(f"shape mismatch: {F0.shape} vs {F_bar.shape}")
    X0 = log1p_scale(F0, cfg.log_scale)
    Xb = log1p_scale(F_bar, cfg.log_scale)
    r = min(cfg.pca_components, *X0.shape)
    basis = pca_fit(X0, r)
    Z = pca_project(basis, X0)
    Zb = pca_project(replace(basis, mean=Xb.mean(axis=0)), Xb)
    return Z, Zb


def _vote(neigh_labels: np.ndarray) -> object:
    # neighbours are sorted by distance; among tied classes the nearest wins
    values, first, counts = np.unique(neigh_labels, return_index=True, return_counts=True)
    best = counts == counts.max()
    return values[best][np.argmin(first[best])]


def knn_classify(train: np.ndarray, labels: np.ndarray, queries: np.ndarray, k: int):
    idx = knn_search(train, queries, min(k, train.shape[0]))
    return np.array([_vote(labels[row]) for row in idx])


def label_transfer_accuracy(F0, labels, F_bar, cfg: MetricConfig = MetricConfig()) -> float:
    """Fraction of pixels whose denoised score is classified with its own label."""
    labels = np.asarray(labels)
    if labels.shape != (np.asarray(F0).shape[0],):
        raise ValueError(f"expected {np.asarray(F0).shape[0]} labels, got {labels.shape}")
    Z, Zb = shared_pca_scores(F0, F_bar, cfg)
    pred = knn_classify(Z, labels, Zb, cfg.classifier_k)
    return float(np.mean(pred == labels))


def knn_overlap(F0, F_bar, cfg: MetricConfig = MetricConfig()) -> float:
    """``(1/m) <A0, A_bar>_F`` for the directed kNN adjacency of both score sets."""
    m = np.asarray(F0).shape[0]
    if cfg.overlap_k >= m:
        raise ValueError(f"overlap_k={cfg.overlap_k} must be < m={m}")
    Z, Zb = shared_pca_scores(F0, F_bar, cfg)
    A0 = np.sort(knn_search(Z, None, cfg.overlap_k), axis=1)
    Ab = np.sort(knn_search(Zb, None, cfg.overlap_k), axis=1)
    shared = sum(np.intersect1d(a, b, assume_unique=True).size for a, b in zip(A0, Ab))
    return shared / m


def relative_error(F0, F_bar) -> float:
    F0 = np.asarray(F0, dtype=float)
    denom = np.linalg.norm(F0)
    if denom == 0:
        raise ValueError("reference matrix has zero norm")
    return float(np.linalg.norm(np.asarray(F_bar, dtype=float) - F0) / denom)


def evaluate_all(F0, F_bar, labels=None, cfg: MetricConfig = MetricConfig()) -> MetricReport:
    lta = None if labels is None else label_transfer_accuracy(F0, labels, F_bar, cfg)
    k = min(cfg.overlap_k, np.asarray(F0).shape[0] - 1)
    return MetricReport(lta, knn_overlap(F0, F_bar, replace(cfg, overlap_k=k)), relative_error(F0, F_bar))
