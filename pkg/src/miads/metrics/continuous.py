"""Continuous metrics for reconstruction and regression: error measures,
PSNR, and an n-D SSIM.

SSIM uses a 7-tap truncated Gaussian window (sigma 1.5) per axis with
k1=0.01, k2=0.03, averaged over all window positions that fit entirely inside
the image. The default data range is taken from the reference image.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import ndimage

from ..errors import MetricWarning

SSIM_WINDOW = 7


def _check_shapes(reference: np.ndarray, prediction: np.ndarray):
    if reference.shape != prediction.shape:
        raise ValueError(
            f"shape mismatch: reference {reference.shape} vs prediction {prediction.shape}"
        )
    if reference.size == 0:
        raise ValueError("empty input")


def error_metrics(reference, prediction) -> dict[str, float]:
    """MAE, MSE, RMSE, NRMSE (range-normalized), R2."""
    reference = np.asarray(reference, dtype=np.float64)
    prediction = np.asarray(prediction, dtype=np.float64)
    _check_shapes(reference, prediction)
    diff = reference - prediction
    mae = float(np.abs(diff).mean())
    mse = float((diff * diff).mean())
    rmse = math.sqrt(mse)
    value_range = float(reference.max() - reference.min())
    if value_range > 0:
        nrmse = rmse / value_range
    else:
        warnings.warn("NRMSE is undefined: constant reference", MetricWarning, stacklevel=2)
        nrmse = float("nan")
    ss_res = float((diff * diff).sum())
    ss_tot = float(((reference - reference.mean()) ** 2).sum())
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        warnings.warn("R2 is undefined: constant reference", MetricWarning, stacklevel=2)
        r2 = float("nan")
    return {"MAE": mae, "MSE": mse, "RMSE": rmse, "NRMSE": nrmse, "R2": r2}


def psnr(reference, prediction, data_range: float | None = None) -> float:
    """Peak signal-to-noise ratio in dB; infinite for identical images."""
    reference = np.asarray(reference, dtype=np.float64)
    prediction = np.asarray(prediction, dtype=np.float64)
    _check_shapes(reference, prediction)
    peak = float(reference.max() - reference.min()) if data_range is None else float(data_range)
    if peak <= 0:
        raise ValueError(f"data range must be positive, got {peak}")
    rmse = math.sqrt(float(((reference - prediction) ** 2).mean()))
    if rmse == 0:
        return float("inf")
    return 20.0 * math.log10(peak / rmse)


def _gaussian_kernel(sigma: float, width: int) -> np.ndarray:
    half = width // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _windowed(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable weighted window means, cropped to fully interior positions."""
    out = arr
    for axis in range(arr.ndim):
        out = ndimage.correlate1d(out, kernel, axis=axis, mode="constant", cval=0.0)
    half = len(kernel) // 2
    crop = tuple(slice(half, n - half) for n in arr.shape)
    return out[crop]


def ssim(
    reference,
    prediction,
    data_range: float | None = None,
    gaussian_sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """Mean structural similarity over all interior window positions; works
    in any dimensionality (2-D and 3-D included)."""
    reference = np.asarray(reference, dtype=np.float64)
    prediction = np.asarray(prediction, dtype=np.float64)
    _check_shapes(reference, prediction)
    if any(n < SSIM_WINDOW for n in reference.shape):
        raise ValueError(
            f"every extent must be >= {SSIM_WINDOW} for SSIM, got {reference.shape}; "
            "evaluate 2-D slices instead"
        )
    peak = float(reference.max() - reference.min()) if data_range is None else float(data_range)
    if peak <= 0:
        raise ValueError(f"data range must be positive, got {peak}")
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    kernel = _gaussian_kernel(gaussian_sigma, SSIM_WINDOW)

    mu_x = _windowed(reference, kernel)
    mu_y = _windowed(prediction, kernel)
    mu_xx = _windowed(reference * reference, kernel)
    mu_yy = _windowed(prediction * prediction, kernel)
    mu_xy = _windowed(reference * prediction, kernel)
    var_x = mu_xx - mu_x * mu_x
    var_y = mu_yy - mu_y * mu_y
    cov_xy = mu_xy - mu_x * mu_y

    values = ((2 * mu_x * mu_y + c1) * (2 * cov_xy + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return float(values.mean())
