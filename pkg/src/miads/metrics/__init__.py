from .confusion import (
    ConfusionMatrix,
    agreement_metrics,
    binarize,
    confusion,
    information_metrics,
    pair_counting,
    ratio_metrics,
    size_metrics,
)
from .continuous import error_metrics, psnr, ssim
from .distance import (
    SurfaceDistances,
    average_distance,
    distance_field,
    extract_surface,
    hausdorff,
    mahalanobis,
    surface_mask,
    surface_metrics,
)

__all__ = [
    "ConfusionMatrix",
    "binarize",
    "confusion",
    "ratio_metrics",
    "pair_counting",
    "information_metrics",
    "agreement_metrics",
    "size_metrics",
    "error_metrics",
    "psnr",
    "ssim",
    "SurfaceDistances",
    "surface_mask",
    "extract_surface",
    "distance_field",
    "hausdorff",
    "average_distance",
    "mahalanobis",
    "surface_metrics",
]
