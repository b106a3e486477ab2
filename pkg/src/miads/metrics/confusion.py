"""Categorical metrics computable from voxel-count statistics.

Every metric follows the same zero-denominator policy: the value becomes NaN
and a MetricWarning is emitted, so a batch evaluation never dies on one empty
label. Counts are kept as Python integers, which keeps pair counting exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..core import ImageGeometry, voxel_volume
from ..errors import MetricWarning


def _nan(metric: str, reason: str) -> float:
    warnings.warn(f"{metric} is undefined: {reason}", MetricWarning, stacklevel=3)
    return float("nan")


def binarize(label_image: np.ndarray, label: int) -> np.ndarray:
    """1 where the voxel equals ``label``, else 0 (uint8)."""
    if label < 0:
        raise ValueError(f"label must be >= 0, got {label}")
    return (np.asarray(label_image) == label).astype(np.uint8)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_masks(cls, reference: np.ndarray, prediction: np.ndarray) -> "ConfusionMatrix":
        reference = np.asarray(reference)
        prediction = np.asarray(prediction)
        if reference.shape != prediction.shape:
            raise ValueError(
                f"shape mismatch: reference {reference.shape} vs prediction {prediction.shape}"
            )
        r = reference != 0
        p = prediction != 0
        tp = int(np.count_nonzero(r & p))
        fp = int(np.count_nonzero(~r & p))
        fn = int(np.count_nonzero(r & ~p))
        tn = r.size - tp - fp - fn
        return cls(tp=tp, fp=fp, tn=tn, fn=fn)


def confusion(reference: np.ndarray, prediction: np.ndarray) -> ConfusionMatrix:
    return ConfusionMatrix.from_masks(reference, prediction)


def _ratio(metric: str, num: float, den: float) -> float:
    if den == 0:
        return _nan(metric, "zero denominator")
    return num / den


def ratio_metrics(cm: ConfusionMatrix, beta: float = 1.0) -> dict[str, float]:
    """DICE, JACRD, SNSVTY, SPCFTY, FALLOUT, FNR, ACURCY, PRCISON, FMEASR, VOLSMTY."""
    tp, fp, tn, fn = cm.tp, cm.fp, cm.tn, cm.fn
    if cm.n == 0:
        raise ValueError("empty confusion matrix")
    out = {
        "DICE": _ratio("DICE", 2 * tp, 2 * tp + fp + fn),
        "JACRD": _ratio("JACRD", tp, tp + fp + fn),
        "SNSVTY": _ratio("SNSVTY", tp, tp + fn),
        "SPCFTY": _ratio("SPCFTY", tn, tn + fp),
        "FALLOUT": _ratio("FALLOUT", fp, fp + tn),
        "FNR": _ratio("FNR", fn, fn + tp),
        "ACURCY": (tp + tn) / cm.n,
        "PRCISON": _ratio("PRCISON", tp, tp + fp),
    }
    precision, recall = out["PRCISON"], out["SNSVTY"]
    b2 = beta * beta
    if math.isnan(precision) or math.isnan(recall) or b2 * precision + recall == 0:
        out["FMEASR"] = _nan("FMEASR", "zero denominator")
    else:
        out["FMEASR"] = (1 + b2) * precision * recall / (b2 * precision + recall)
    out["VOLSMTY"] = (
        1.0 - abs(fn - fp) / (2 * tp + fp + fn)
        if 2 * tp + fp + fn > 0
        else _nan("VOLSMTY", "both masks empty")
    )
    return out


def _comb2(k: int) -> int:
    return k * (k - 1) // 2


def pair_counting(cm: ConfusionMatrix) -> tuple[float, float]:
    """(RNDIND, ADJRIND): pair counting over the 2x2 co-membership contingency.

    The adjusted index uses the permutation-model expectation; a degenerate
    denominator (both partitions trivial or identical marginals at the
    maximum) is reported as perfect agreement 1.0.
    """
    if cm.n < 2:
        raise ValueError("pair counting needs at least two elements")
    tp, fp, tn, fn = cm.tp, cm.fp, cm.tn, cm.fn
    total_pairs = _comb2(cm.n)
    index = _comb2(tp) + _comb2(fp) + _comb2(fn) + _comb2(tn)
    sum_rows = _comb2(tp + fn) + _comb2(fp + tn)  # reference marginals
    sum_cols = _comb2(tp + fp) + _comb2(fn + tn)  # prediction marginals
    agreements = total_pairs + 2 * index - sum_rows - sum_cols
    rand_index = agreements / total_pairs
    expected = sum_rows * sum_cols / total_pairs
    max_index = (sum_rows + sum_cols) / 2
    if max_index == expected:
        return rand_index, 1.0
    adjusted = (index - expected) / (max_index - expected)
    return rand_index, adjusted


def _entropy(probabilities) -> float:
    return -sum(p * math.log2(p) for p in probabilities if p > 0)


def information_metrics(cm: ConfusionMatrix) -> tuple[float, float]:
    """(MUTINF, VARINFO) in bits, from the joint cell distribution."""
    if cm.n == 0:
        raise ValueError("empty confusion matrix")
    n = cm.n
    joint = [cm.tp / n, cm.fn / n, cm.fp / n, cm.tn / n]
    h_ref = _entropy([(cm.tp + cm.fn) / n, (cm.fp + cm.tn) / n])
    h_pred = _entropy([(cm.tp + cm.fp) / n, (cm.fn + cm.tn) / n])
    h_joint = _entropy(joint)
    mutual_information = h_ref + h_pred - h_joint
    variation_of_information = h_ref + h_pred - 2 * mutual_information
    return mutual_information, variation_of_information


def _gce_directed(a: int, b: int, c: int, d: int) -> float:
    """One direction of the global consistency error from counts
    (a=tp, b=fn, c=fp, d=tn for reference->prediction)."""
    first = b * (b + 2 * a) / (a + b) if a + b > 0 else 0.0
    second = c * (c + 2 * d) / (c + d) if c + d > 0 else 0.0
    return first + second


def agreement_metrics(cm: ConfusionMatrix) -> dict[str, float]:
    """GCOERR, KAPPA, AUC, ICCORR, PROBDST.

    AUC is the crisp-mask form (balanced accuracy); ICCORR is the one-way,
    two-rater intraclass correlation over voxel values.
    """
    tp, fp, tn, fn = cm.tp, cm.fp, cm.tn, cm.fn
    n = cm.n
    if n == 0:
        raise ValueError("empty confusion matrix")
    out: dict[str, float] = {}

    out["GCOERR"] = min(_gce_directed(tp, fn, fp, tn), _gce_directed(tp, fp, fn, tn)) / n

    po = (tp + tn) / n
    pe = ((tp + fn) * (tp + fp) + (fp + tn) * (fn + tn)) / (n * n)
    out["KAPPA"] = _nan("KAPPA", "chance agreement is 1") if pe == 1.0 else (po - pe) / (1 - pe)

    sens = tp / (tp + fn) if tp + fn > 0 else float("nan")
    spec = tn / (tn + fp) if tn + fp > 0 else float("nan")
    out["AUC"] = (
        _nan("AUC", "a marginal class is empty")
        if math.isnan(sens) or math.isnan(spec)
        else (sens + spec) / 2
    )

    # one-way mean squares from counts: per-voxel rater mean is 1, 1/2 or 0
    grand = (2 * tp + fp + fn) / (2 * n)
    ssb = 2 * (tp * (1 - grand) ** 2 + (fp + fn) * (0.5 - grand) ** 2 + tn * grand**2)
    msb = ssb / (n - 1) if n > 1 else 0.0
    msw = (fp + fn) / (2 * n)
    out["ICCORR"] = (
        _nan("ICCORR", "no variance between voxels")
        if msb + msw == 0
        else (msb - msw) / (msb + msw)
    )

    out["PROBDST"] = (
        _nan("PROBDST", "masks do not intersect") if tp == 0 else (fn + fp) / (2 * tp)
    )
    return out


def size_metrics(
    reference: np.ndarray,
    prediction: np.ndarray,
    geometry: ImageGeometry,
    slice_index: int | None = None,
) -> dict[str, float]:
    """AREA (mm^2, one axis-0 slice, central by default) and VOL (mm^3),
    reported separately for reference and prediction."""
    reference = np.asarray(reference)
    prediction = np.asarray(prediction)
    if reference.shape != prediction.shape:
        raise ValueError("shape mismatch between reference and prediction")
    volume = voxel_volume(geometry)
    out = {
        "VOL_REF": float(np.count_nonzero(reference)) * volume,
        "VOL_PRED": float(np.count_nonzero(prediction)) * volume,
    }
    if reference.ndim >= 3:
        if slice_index is None:
            slice_index = reference.shape[0] // 2
        if not 0 <= slice_index < reference.shape[0]:
            raise ValueError(
                f"slice index {slice_index} out of range [0, {reference.shape[0]})"
            )
        ref_slice = reference[slice_index]
        pred_slice = prediction[slice_index]
        pixel_area = float(np.prod(geometry.spacing[-2:]))
    else:
        ref_slice, pred_slice = reference, prediction
        pixel_area = float(np.prod(geometry.spacing[-2:]))
    out["AREA_REF"] = float(np.count_nonzero(ref_slice)) * pixel_area
    out["AREA_PRED"] = float(np.count_nonzero(pred_slice)) * pixel_area
    return out
