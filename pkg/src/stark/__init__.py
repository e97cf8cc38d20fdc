"""Denoising and interpolation of spatial gene-expression images by kernel
ridge regression with an adaptive graph-Laplacian regulariser."""

__version__ = "0.1.0"

from .kernel import KernelConfig, auto_length_scale, kernel_eval, kernel_matrix
from .graph import (
    build_edge_set,
    effective_laplacian,
    graph_entropy,
    spatial_weights,
    update_weights,
)
from .solver import (
    DenoisedModel,
    Hyperparameters,
    KernelSystem,
    autotune,
    evaluate,
    fit,
    objective,
    simplex_threshold,
    theta_update,
)
from .metrics import (
    MetricConfig,
    knn_overlap,
    label_transfer_accuracy,
    relative_error,
)
