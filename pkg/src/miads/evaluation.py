"""Evaluation orchestration: per-label metric computation over subjects,
CSV/console reporting, and aggregate statistics.

The metric abbreviations are the stable reporting contract: they are the CSV
column names. Expensive intermediates (confusion matrix, directed surface
distances) are computed once per (subject, label) and shared by all metrics
that need them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import ImageGeometry
from .errors import EvaluationError, MetricWarning
from .metrics.confusion import (
    ConfusionMatrix,
    agreement_metrics,
    binarize,
    information_metrics,
    pair_counting,
    ratio_metrics,
    size_metrics,
)
from .metrics.continuous import error_metrics, psnr, ssim
from .metrics.distance import SurfaceDistances, _percentile

CATEGORICAL_METRICS = (
    "DICE", "JACRD", "SNSVTY", "SPCFTY", "FALLOUT", "FNR", "ACURCY", "PRCISON",
    "TP", "FP", "TN", "FN", "FMEASR", "GCOERR", "VOLSMTY", "RNDIND", "ADJRIND",
    "MUTINF", "VARINFO", "ICCORR", "PROBDST", "KAPPA", "AUC",
    "HDRFDST", "AVGDIST", "MAHLNBS", "SURFOVLP", "SURFDICE", "AREA", "VOL",
)

CONTINUOUS_METRICS = ("R2", "MAE", "MSE", "RMSE", "NRMSE", "PSNR", "SSIM")

_RATIO_SET = {
    "DICE", "JACRD", "SNSVTY", "SPCFTY", "FALLOUT", "FNR", "ACURCY", "PRCISON",
    "FMEASR", "VOLSMTY",
}
_AGREEMENT_SET = {"GCOERR", "KAPPA", "AUC", "ICCORR", "PROBDST"}
_SURFACE_SET = {"HDRFDST", "AVGDIST", "SURFOVLP", "SURFDICE"}


@dataclass(frozen=True)
class MetricSpec:
    """One requested metric with its parameters (Table-style remarks:
    beta, percentile, tolerance and slice are definable)."""

    abbreviation: str
    beta: float = 1.0
    percentile: float = 100.0
    tolerance_mm: float = 1.0
    slice_index: int | None = None
    data_range: float | None = None

    def columns(self) -> list[str]:
        a = self.abbreviation
        if a == "HDRFDST":
            if self.percentile == 100.0:
                return ["HDRFDST"]
            p = self.percentile
            return [f"HDRFDST{int(p) if float(p).is_integer() else p}"]
        if a == "SURFOVLP":
            return ["SURFOVLP_REF", "SURFOVLP_PRED"]
        if a == "AREA":
            return ["AREA_REF", "AREA_PRED"]
        if a == "VOL":
            return ["VOL_REF", "VOL_PRED"]
        return [a]


def parse_metric(token: str) -> MetricSpec:
    """Turn a reporting token into a spec; 'HDRFDST95' selects the 95th
    percentile Hausdorff distance."""
    token = token.strip()
    if token in CATEGORICAL_METRICS or token in CONTINUOUS_METRICS:
        return MetricSpec(token)
    if token.startswith("HDRFDST"):
        suffix = token[len("HDRFDST"):]
        try:
            percentile = float(suffix)
        except ValueError:
            percentile = None
        if percentile is not None and 0.0 < percentile <= 100.0:
            return MetricSpec("HDRFDST", percentile=percentile)
    valid = ", ".join(CATEGORICAL_METRICS + CONTINUOUS_METRICS)
    raise EvaluationError(f"unknown metric {token!r}; valid metrics: {valid}")


def _as_specs(metrics) -> list[MetricSpec]:
    specs = []
    for m in metrics:
        specs.append(parse_metric(m) if isinstance(m, str) else m)
    return specs


@dataclass(frozen=True)
class EvaluationResult:
    subject_id: str
    label_name: str
    metric: str
    value: float


@dataclass
class _LabelContext:
    """Shared per-(subject, label) intermediates."""

    ref: np.ndarray
    pred: np.ndarray
    geometry: ImageGeometry
    _cm: ConfusionMatrix | None = None
    _surface: SurfaceDistances | None = None
    _surface_failed: bool = field(default=False)

    @property
    def cm(self) -> ConfusionMatrix:
        if self._cm is None:
            self._cm = ConfusionMatrix.from_masks(self.ref, self.pred)
        return self._cm

    @property
    def surface(self) -> SurfaceDistances | None:
        if self._surface is None and not self._surface_failed:
            try:
                self._surface = SurfaceDistances.compute(
                    self.ref, self.pred, self.geometry.spacing
                )
            except ValueError:
                self._surface_failed = True
        return self._surface


def _surface_nan(name: str) -> float:
    warnings.warn(f"{name} is undefined: empty mask", MetricWarning, stacklevel=3)
    return float("nan")


def _compute_categorical(spec: MetricSpec, ctx: _LabelContext) -> list[tuple[str, float]]:
    a = spec.abbreviation
    if a in _RATIO_SET:
        return [(a, ratio_metrics(ctx.cm, beta=spec.beta)[a])]
    if a in ("TP", "FP", "TN", "FN"):
        return [(a, float(getattr(ctx.cm, a.lower())))]
    if a in _AGREEMENT_SET:
        return [(a, agreement_metrics(ctx.cm)[a])]
    if a == "RNDIND":
        return [(a, pair_counting(ctx.cm)[0])]
    if a == "ADJRIND":
        return [(a, pair_counting(ctx.cm)[1])]
    if a == "MUTINF":
        return [(a, information_metrics(ctx.cm)[0])]
    if a == "VARINFO":
        return [(a, information_metrics(ctx.cm)[1])]
    if a in ("AREA", "VOL"):
        values = size_metrics(ctx.ref, ctx.pred, ctx.geometry, slice_index=spec.slice_index)
        return [(c, values[c]) for c in spec.columns()]
    if a == "MAHLNBS":
        from .metrics.distance import mahalanobis

        return [(a, mahalanobis(ctx.ref, ctx.pred, ctx.geometry.spacing))]
    if a in _SURFACE_SET:
        column = spec.columns()[0]
        surface = ctx.surface
        if a == "HDRFDST":
            if surface is None:
                return [(column, _surface_nan(column))]
            value = max(
                _percentile(surface.ref_to_pred, spec.percentile),
                _percentile(surface.pred_to_ref, spec.percentile),
            )
            return [(column, value)]
        if a == "AVGDIST":
            if surface is None:
                return [(column, _surface_nan(column))]
            total = surface.ref_to_pred.sum() + surface.pred_to_ref.sum()
            count = len(surface.ref_to_pred) + len(surface.pred_to_ref)
            return [(column, float(total / count))]
        if surface is None:
            return [(c, _surface_nan(c)) for c in spec.columns()]
        tol = spec.tolerance_mm
        ref_hits = int(np.count_nonzero(surface.ref_to_pred <= tol))
        pred_hits = int(np.count_nonzero(surface.pred_to_ref <= tol))
        n_ref, n_pred = len(surface.ref_to_pred), len(surface.pred_to_ref)
        if a == "SURFOVLP":
            return [("SURFOVLP_REF", ref_hits / n_ref), ("SURFOVLP_PRED", pred_hits / n_pred)]
        return [("SURFDICE", (ref_hits + pred_hits) / (n_ref + n_pred))]
    raise EvaluationError(f"metric {a!r} is not a categorical metric")


def evaluate_segmentation(
    reference: np.ndarray,
    prediction: np.ndarray,
    labels: dict[int, str],
    metrics,
    subject_id: str,
    geometry: ImageGeometry,
    prediction_geometry: ImageGeometry | None = None,
) -> list[EvaluationResult]:
    """Binarize per label and compute every requested metric; one result row
    per (subject, label, metric column), in label then metric order."""
    reference = np.asarray(reference)
    prediction = np.asarray(prediction)
    if reference.shape != prediction.shape:
        raise EvaluationError(
            f"shape mismatch: reference {reference.shape} vs prediction {prediction.shape}"
        )
    if prediction_geometry is not None:
        if len(prediction_geometry.spacing) != len(geometry.spacing) or any(
            abs(a - b) > 1e-6 for a, b in zip(prediction_geometry.spacing, geometry.spacing)
        ):
            raise EvaluationError(
                f"geometry mismatch: reference spacing {geometry.spacing} vs "
                f"prediction spacing {prediction_geometry.spacing}"
            )
    names = list(labels.values())
    if len(set(names)) != len(names) or any(not n for n in names):
        raise EvaluationError("label names must be unique and non-empty")
    specs = _as_specs(metrics)
    for spec in specs:
        if spec.abbreviation not in CATEGORICAL_METRICS:
            raise EvaluationError(f"{spec.abbreviation!r} is not a segmentation metric")

    results: list[EvaluationResult] = []
    for label, label_name in labels.items():
        ref_mask = binarize(reference, label)
        pred_mask = binarize(prediction, label)
        if not ref_mask.any() and not pred_mask.any():
            warnings.warn(
                f"label {label_name!r} ({label}) absent from both reference and "
                f"prediction of {subject_id}; reporting NaN",
                MetricWarning,
                stacklevel=2,
            )
            for spec in specs:
                for column in spec.columns():
                    results.append(
                        EvaluationResult(subject_id, label_name, column, float("nan"))
                    )
            continue
        ctx = _LabelContext(ref=ref_mask, pred=pred_mask, geometry=geometry)
        for spec in specs:
            for column, value in _compute_categorical(spec, ctx):
                results.append(EvaluationResult(subject_id, label_name, column, float(value)))
    return results


def evaluate_continuous(
    reference: np.ndarray,
    prediction: np.ndarray,
    metrics,
    subject_id: str,
) -> list[EvaluationResult]:
    """Reconstruction/regression metrics; the label column is '-'."""
    reference = np.asarray(reference)
    prediction = np.asarray(prediction)
    if reference.shape != prediction.shape:
        raise EvaluationError(
            f"shape mismatch: reference {reference.shape} vs prediction {prediction.shape}"
        )
    specs = _as_specs(metrics)
    for spec in specs:
        if spec.abbreviation not in CONTINUOUS_METRICS:
            raise EvaluationError(f"{spec.abbreviation!r} is not a continuous metric")
    results = []
    errors: dict[str, float] | None = None
    for spec in specs:
        a = spec.abbreviation
        if a in ("MAE", "MSE", "RMSE", "NRMSE", "R2"):
            if errors is None:
                errors = error_metrics(reference, prediction)
            value = errors[a]
        elif a == "PSNR":
            value = psnr(reference, prediction, data_range=spec.data_range)
        else:
            value = ssim(reference, prediction, data_range=spec.data_range)
        results.append(EvaluationResult(subject_id, "-", a, float(value)))
    return results


# -- reporting ---------------------------------------------------------------


def format_value(value: float) -> str:
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def _pivot(results: list[EvaluationResult]):
    """Rows keyed by (subject, label) with a uniform metric column set."""
    if not results:
        raise EvaluationError("no results to write")
    columns: list[str] = []
    rows: dict[tuple[str, str], dict[str, float]] = {}
    for result in results:
        if result.metric not in columns:
            columns.append(result.metric)
        key = (result.subject_id, result.label_name)
        row = rows.setdefault(key, {})
        if result.metric in row:
            raise EvaluationError(
                f"duplicate result for {key} metric {result.metric!r}"
            )
        row[result.metric] = result.value
    for key, row in rows.items():
        if set(row) != set(columns):
            raise EvaluationError(
                f"heterogeneous metric sets: {key} has {sorted(row)}, expected {columns}"
            )
    return columns, rows


def write_csv(results: list[EvaluationResult], path: str, delimiter: str = ";") -> None:
    columns, rows = _pivot(results)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(delimiter.join(["SUBJECT", "LABEL"] + columns) + "\n")
        for (subject, label), row in rows.items():
            cells = [subject, label] + [format_value(row[c]) for c in columns]
            fh.write(delimiter.join(cells) + "\n")


def render_console(results: list[EvaluationResult]) -> str:
    columns, rows = _pivot(results)
    header = ["SUBJECT", "LABEL"] + columns
    table = [header]
    for (subject, label), row in rows.items():
        table.append([subject, label] + [format_value(row[c]) for c in columns])
    widths = [max(len(line[i]) for line in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in table]
    return "\n".join(lines) + "\n"


def write_console(results: list[EvaluationResult], stream=None) -> None:
    import sys

    (stream or sys.stdout).write(render_console(results))


def read_results_csv(path: str, delimiter: str = ";") -> list[EvaluationResult]:
    """Parse a results CSV back into rows (inverse of write_csv)."""
    results = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise EvaluationError(f"{path}: empty results file")
    header = lines[0].split(delimiter)
    if header[:2] != ["SUBJECT", "LABEL"]:
        raise EvaluationError(f"{path}: not a results CSV (header {header[:2]})")
    columns = header[2:]
    for line in lines[1:]:
        cells = line.split(delimiter)
        if len(cells) != len(header):
            raise EvaluationError(f"{path}: malformed row {line!r}")
        for column, cell in zip(columns, cells[2:]):
            results.append(EvaluationResult(cells[0], cells[1], column, float(cell)))
    return results


# -- statistics ---------------------------------------------------------------


@dataclass(frozen=True)
class StatisticsRow:
    label_name: str
    metric: str
    statistic: str
    value: float
    excluded: int


STATISTIC_FUNCTIONS = {
    "MEAN": np.mean,
    "STD": np.std,  # population standard deviation
    "MEDIAN": np.median,
    "MIN": np.min,
    "MAX": np.max,
    "P25": lambda v: np.percentile(v, 25),
    "P75": lambda v: np.percentile(v, 75),
}


def aggregate(results: list[EvaluationResult], functions=("MEAN", "STD")) -> list[StatisticsRow]:
    """Reduce over subjects per (label, metric); NaN values are excluded and
    counted. ``functions`` may be statistic names or a mapping name->callable
    taking a list of values and returning a scalar."""
    reducers: dict[str, object] = {}
    if isinstance(functions, dict):
        reducers = dict(functions)
    else:
        for name in functions:
            if name not in STATISTIC_FUNCTIONS:
                raise EvaluationError(
                    f"unknown statistic {name!r}; valid: {', '.join(STATISTIC_FUNCTIONS)}"
                )
            reducers[name] = STATISTIC_FUNCTIONS[name]

    groups: dict[tuple[str, str], list[float]] = {}
    for result in results:
        groups.setdefault((result.label_name, result.metric), []).append(result.value)

    rows = []
    for (label, metric), values in groups.items():
        kept = [v for v in values if not math.isnan(v)]
        excluded = len(values) - len(kept)
        for name, reducer in reducers.items():
            if kept:
                value = float(reducer(kept))
            else:
                warnings.warn(
                    f"statistic {name} of {metric} for label {label!r} has no finite "
                    "values; reporting NaN",
                    MetricWarning,
                    stacklevel=2,
                )
                value = float("nan")
            rows.append(StatisticsRow(label, metric, name, value, excluded))
    return rows


def write_statistics_csv(rows: list[StatisticsRow], path: str, delimiter: str = ";") -> None:
    if not rows:
        raise EvaluationError("no statistics to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(delimiter.join(["LABEL", "METRIC", "STATISTIC", "VALUE", "EXCLUDED"]) + "\n")
        for row in rows:
            fh.write(
                delimiter.join(
                    [row.label_name, row.metric, row.statistic,
                     format_value(row.value), str(row.excluded)]
                )
                + "\n"
            )


def render_statistics_console(rows: list[StatisticsRow]) -> str:
    header = ["LABEL", "METRIC", "STATISTIC", "VALUE", "EXCLUDED"]
    table = [header] + [
        [r.label_name, r.metric, r.statistic, format_value(r.value), str(r.excluded)]
        for r in rows
    ]
    widths = [max(len(line[i]) for line in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in table]
    return "\n".join(lines) + "\n"


def write_statistics_console(rows: list[StatisticsRow], stream=None) -> None:
    import sys

    (stream or sys.stdout).write(render_statistics_console(rows))
