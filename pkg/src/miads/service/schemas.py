"""Request/response models of the HTTP service.

Arrays travel as contiguous little-endian C-order bytes, base64-encoded, next
to their dtype and shape. Metric values are transported as strings in exactly
the CSV cell format (shortest round-trip decimal, "NaN"/"inf"/"-inf"), so
clients observe bitwise the same values the CLI writes.
"""

from __future__ import annotations

import base64
from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, Field

from ..access import (
    ApplyMask,
    DataExtractor,
    EmptyIndexing,
    GeometryExtractor,
    NamesExtractor,
    PadDataExtractor,
    PaddedPatchIndexing,
    PatchIndexing,
    PermuteChannelsFirst,
    RandomFlip,
    RescaleIntensity,
    SelectiveDataExtractor,
    ShapeExtractor,
    SliceIndexing,
    SubjectIdExtractor,
    ZNormalize,
)
from ..core import SUPPORTED_DTYPES, ImageGeometry
from ..errors import ConfigurationError
from ..evaluation import MetricSpec


class ArrayPayload(BaseModel):
    dtype: str
    shape: list[int]
    data_b64: str

    @classmethod
    def from_numpy(cls, arr: np.ndarray) -> "ArrayPayload":
        return cls(
            dtype=arr.dtype.name,
            shape=list(arr.shape),
            data_b64=base64.b64encode(np.ascontiguousarray(arr).tobytes()).decode("ascii"),
        )

    def to_numpy(self) -> np.ndarray:
        if self.dtype not in SUPPORTED_DTYPES:
            raise ConfigurationError(f"unsupported dtype {self.dtype!r}")
        raw = base64.b64decode(self.data_b64)
        expected = int(np.prod(self.shape)) * np.dtype(self.dtype).itemsize
        if len(raw) != expected:
            raise ConfigurationError(
                f"payload holds {len(raw)} bytes but shape {self.shape} needs {expected}"
            )
        return np.frombuffer(raw, dtype=self.dtype).reshape(tuple(self.shape)).copy()


class GeometryModel(BaseModel):
    spacing: list[float]
    origin: list[float] = Field(default_factory=list)
    direction: list[float] = Field(default_factory=list)

    @classmethod
    def from_geometry(cls, geometry: ImageGeometry) -> "GeometryModel":
        return cls(
            spacing=list(geometry.spacing),
            origin=list(geometry.origin),
            direction=list(geometry.direction),
        )

    def to_geometry(self) -> ImageGeometry:
        return ImageGeometry(
            spacing=tuple(self.spacing),
            origin=tuple(self.origin),
            direction=tuple(self.direction),
        )


class StrategyModel(BaseModel):
    kind: Literal["empty", "slice", "patch", "padded_patch"]
    axis: int = 0
    shape: list[int] | None = None
    step: list[int] | None = None
    core_shape: list[int] | None = None
    pad: list[int] | None = None

    def build(self):
        if self.kind == "empty":
            return EmptyIndexing()
        if self.kind == "slice":
            return SliceIndexing(self.axis)
        if self.kind == "patch":
            if not self.shape:
                raise ConfigurationError("patch strategy needs 'shape'")
            return PatchIndexing(tuple(self.shape), tuple(self.step) if self.step else None)
        if not self.core_shape or self.pad is None:
            raise ConfigurationError("padded_patch strategy needs 'core_shape' and 'pad'")
        return PaddedPatchIndexing(tuple(self.core_shape), tuple(self.pad))


class ExtractorModel(BaseModel):
    kind: Literal[
        "data", "pad_data", "selective_data", "subject_id", "geometry", "shape", "names"
    ]
    category: str = "images"
    channels: list[str] | None = None
    mode: Literal["zero", "mirror"] = "zero"
    key: str | None = None

    def build(self):
        if self.kind == "data":
            return DataExtractor(self.category, key=self.key)
        if self.kind == "pad_data":
            return PadDataExtractor(self.category, mode=self.mode, key=self.key)
        if self.kind == "selective_data":
            if not self.channels:
                raise ConfigurationError("selective_data extractor needs 'channels'")
            return SelectiveDataExtractor(self.category, tuple(self.channels), key=self.key)
        if self.kind == "subject_id":
            return SubjectIdExtractor()
        if self.kind == "geometry":
            return GeometryExtractor(self.category)
        if self.kind == "shape":
            return ShapeExtractor()
        return NamesExtractor(self.category)


class TransformModel(BaseModel):
    kind: Literal[
        "znormalize", "rescale_intensity", "apply_mask", "random_flip", "permute_channels_first"
    ]
    keys: list[str] | None = None
    out_min: float = 0.0
    out_max: float = 1.0
    mask_key: str = "mask"
    axes: list[int] = Field(default_factory=lambda: [0])
    probability: float = 0.5

    def build(self):
        keys = tuple(self.keys) if self.keys else ("images",)
        if self.kind == "znormalize":
            return ZNormalize(keys)
        if self.kind == "rescale_intensity":
            return RescaleIntensity(self.out_min, self.out_max, keys)
        if self.kind == "apply_mask":
            return ApplyMask(self.mask_key, keys)
        if self.kind == "random_flip":
            return RandomFlip(tuple(self.axes), self.probability,
                              tuple(self.keys) if self.keys else None)
        return PermuteChannelsFirst(keys)


class DatasourceRequest(BaseModel):
    dataset_path: str
    strategy: StrategyModel
    extractors: list[ExtractorModel] = Field(
        default_factory=lambda: [ExtractorModel(kind="data")]
    )
    transforms: list[TransformModel] = Field(default_factory=list)
    seed: int = 0
    filesystem: bool = False  # True: load payloads from recorded source files


class DatasourceInfo(BaseModel):
    datasource_id: str
    length: int
    subjects: list[str]
    spatial_shapes: list[list[int]]


class RegionModel(BaseModel):
    start: list[int]
    size: list[int]


class SampleResponse(BaseModel):
    sample_index: int
    subject_id: str
    subject_index: int
    region: RegionModel
    pad: list[int]
    plane: int | None
    arrays: dict[str, ArrayPayload]
    meta: dict[str, object] = Field(default_factory=dict)


class AssemblerRequest(BaseModel):
    datasource_id: str


class AssemblerInfo(BaseModel):
    assembler_id: str
    datasource_id: str
    expected: dict[str, int]


class PredictionRequest(BaseModel):
    sample_index: int
    prediction: ArrayPayload


class PredictionStatus(BaseModel):
    subject_id: str
    received: int
    expected: int
    ready: bool


class MetricModel(BaseModel):
    abbreviation: str
    beta: float = 1.0
    percentile: float = 100.0
    tolerance_mm: float = 1.0
    slice_index: int | None = None
    data_range: float | None = None

    def build(self) -> MetricSpec:
        return MetricSpec(
            abbreviation=self.abbreviation,
            beta=self.beta,
            percentile=self.percentile,
            tolerance_mm=self.tolerance_mm,
            slice_index=self.slice_index,
            data_range=self.data_range,
        )


class SegmentationEvaluationRequest(BaseModel):
    subject_id: str
    reference: ArrayPayload
    prediction: ArrayPayload
    spacing: list[float]
    labels: dict[str, str]  # label integer (as string, JSON keys) -> display name
    metrics: list[Union[str, MetricModel]]


class ContinuousEvaluationRequest(BaseModel):
    subject_id: str
    reference: ArrayPayload
    prediction: ArrayPayload
    metrics: list[Union[str, MetricModel]]


class ResultRow(BaseModel):
    subject_id: str
    label: str
    metric: str
    value: str  # CSV cell format; parse with float()/Number()


class EvaluationResponse(BaseModel):
    results: list[ResultRow]


class ImageResponse(BaseModel):
    array: ArrayPayload
    geometry: GeometryModel


class HealthResponse(BaseModel):
    status: str
    version: str
