"""Dataset creation: turn a plan of subjects and source files into a container.

A plan maps each subject to category -> file path(s) or inline scalar payload.
Image files are loaded (or, for metadata-only containers, only their headers),
channel files are concatenated on a trailing axis, optional write-time
transforms are applied, and everything is written in plan order so that the
resulting file is byte-deterministic.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..core import ImageGeometry
from ..errors import CreationError, FormatError, MiadsError
from ..imageio import hash_file, read_image, read_image_header
from .container import (
    CategoryDescriptor,
    ContainerSummary,
    ContainerWriter,
    DatasetMetadata,
    ProvenanceEntry,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


@dataclass
class TransformSpec:
    """A write-time payload transform, replayed at load time by
    filesystem-backed handles so both storage modes yield identical bytes."""

    kind: str
    categories: tuple[str, ...] = ("images",)
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind, "categories": list(self.categories), "params": self.params}

    @classmethod
    def from_json(cls, obj: dict) -> "TransformSpec":
        return cls(obj["kind"], tuple(obj["categories"]), dict(obj.get("params", {})))


@dataclass
class SubjectPlan:
    subject_id: str
    sources: dict  # category -> str | list[str] | int | float | list[float]


@dataclass
class CreationPlan:
    subjects: list[SubjectPlan] = field(default_factory=list)
    names: dict[str, list[str]] = field(default_factory=dict)
    transforms: list[TransformSpec] = field(default_factory=list)
    record_hashes: bool = False
    metadata_only: bool = False
    name: str = ""


def apply_payload_transform(arr: np.ndarray, spec: TransformSpec) -> np.ndarray:
    """Apply one write-time transform to a (spatial..., C) float tensor."""
    if arr.dtype.kind != "f":
        raise CreationError(
            f"transform {spec.kind!r} requires a float category, got {arr.dtype.name}"
        )
    out = arr.astype(np.float64, copy=True)
    if spec.kind == "znormalize":
        for c in range(out.shape[-1]):
            channel = out[..., c]
            mean = channel.mean()
            std = channel.std()
            if std > 0:
                out[..., c] = (channel - mean) / std
            else:
                out[..., c] = channel - mean
    elif spec.kind == "rescale_intensity":
        lo = float(spec.params.get("out_min", 0.0))
        hi = float(spec.params.get("out_max", 1.0))
        for c in range(out.shape[-1]):
            channel = out[..., c]
            cmin, cmax = channel.min(), channel.max()
            if cmax > cmin:
                out[..., c] = (channel - cmin) / (cmax - cmin) * (hi - lo) + lo
            else:
                out[..., c] = lo
    else:
        raise CreationError(f"unknown transform kind {spec.kind!r}")
    return out.astype(arr.dtype)


def _is_path_value(value) -> bool:
    return isinstance(value, str) or (
        isinstance(value, (list, tuple)) and value and all(isinstance(v, str) for v in value)
    )


def _inline_tensor(value) -> np.ndarray:
    """Inline scalar payloads: ints become uint8 codes (int32 when out of
    range), floats and float lists become float64 vectors."""
    if isinstance(value, bool):
        raise CreationError("boolean inline payloads are not supported")
    if isinstance(value, int):
        return np.asarray([value], dtype=np.uint8 if 0 <= value < 256 else np.int32)
    if isinstance(value, float):
        return np.asarray([value], dtype=np.float64)
    if isinstance(value, (list, tuple)) and value and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        return np.asarray(value, dtype=np.float64)
    raise CreationError(f"unsupported inline payload {value!r}")


def _load_image_category(
    subject_id: str,
    category: str,
    paths: list[str],
    metadata_only: bool,
):
    """Load (or header-scan) the channel files of one image category.

    Returns (tensor_or_None, shape_with_channels, dtype_name, geometry).
    """
    shapes, dtypes, geometries, arrays = [], [], [], []
    for path in paths:
        try:
            if metadata_only:
                shape, dtype, geometry = read_image_header(path)
            else:
                arr, geometry = read_image(path)
                shape, dtype = arr.shape, arr.dtype.name
                arrays.append(arr)
        except FileNotFoundError as exc:
            raise CreationError(f"{subject_id}/{category}: source file not found: {path}") from exc
        except MiadsError:
            raise
        shapes.append(tuple(shape))
        dtypes.append(dtype)
        geometries.append(geometry)
    if len(set(shapes)) != 1:
        raise CreationError(
            f"{subject_id}/{category}: channel files have differing shapes {shapes}"
        )
    if len(set(dtypes)) != 1:
        raise CreationError(
            f"{subject_id}/{category}: channel files have differing dtypes {dtypes}"
        )
    full_shape = shapes[0] + (len(paths),)
    tensor = None
    if not metadata_only:
        tensor = np.stack(arrays, axis=-1)
    return tensor, full_shape, dtypes[0], geometries[0]


def create_dataset(plan: CreationPlan, out_path: str) -> ContainerSummary:
    """Write a container from the plan; see create_metadata_dataset for the
    payload-free variant."""
    seen = set()
    for subject in plan.subjects:
        if subject.subject_id in seen:
            raise CreationError(f"duplicate subject_id {subject.subject_id!r}")
        seen.add(subject.subject_id)

    category_order: list[str] = []
    if plan.subjects:
        category_order = list(plan.subjects[0].sources.keys())
        for subject in plan.subjects[1:]:
            if list(subject.sources.keys()) != category_order:
                raise CreationError(
                    f"subject {subject.subject_id!r} has categories "
                    f"{list(subject.sources.keys())} but the plan defines {category_order}"
                )

    transform_map: dict[str, list[TransformSpec]] = {}
    for spec in plan.transforms:
        for category in spec.categories:
            transform_map.setdefault(category, []).append(spec)

    metadata = DatasetMetadata(
        name=plan.name,
        metadata_only=plan.metadata_only,
        subjects=[s.subject_id for s in plan.subjects],
        names={k: list(v) for k, v in plan.names.items()},
        transforms=[t.to_json() for t in plan.transforms],
    )

    writer = ContainerWriter(out_path)
    try:
        for subject in plan.subjects:
            spatial_shapes: dict[str, tuple[int, ...]] = {}
            for category in category_order:
                value = subject.sources[category]
                if _is_path_value(value):
                    paths = [value] if isinstance(value, str) else list(value)
                    paths = [os.path.abspath(p) for p in paths]
                    tensor, shape, dtype, geometry = _load_image_category(
                        subject.subject_id, category, paths, plan.metadata_only
                    )
                    spatial_shapes[category] = shape[:-1]
                    if tensor is not None:
                        for spec in transform_map.get(category, ()):
                            tensor = apply_payload_transform(tensor, spec)
                    offset = None if plan.metadata_only else writer.append(tensor)
                    metadata.categories.append(
                        CategoryDescriptor(
                            subject_id=subject.subject_id,
                            category=category,
                            dtype=dtype,
                            shape=shape,
                            byte_offset=offset,
                            geometry=geometry,
                            source_paths=tuple(paths),
                        )
                    )
                    for path in paths:
                        metadata.provenance.append(
                            ProvenanceEntry(
                                subject_id=subject.subject_id,
                                category=category,
                                source_path=path,
                                sha256=hash_file(path) if plan.record_hashes else None,
                            )
                        )
                else:
                    tensor = _inline_tensor(value)
                    offset = None if plan.metadata_only else writer.append(tensor)
                    metadata.categories.append(
                        CategoryDescriptor(
                            subject_id=subject.subject_id,
                            category=category,
                            dtype=tensor.dtype.name,
                            shape=tensor.shape,
                            byte_offset=offset,
                            inline=[v.item() for v in tensor],
                        )
                    )
            image_shapes = {c: s for c, s in spatial_shapes.items()}
            if len(set(image_shapes.values())) > 1:
                detail = ", ".join(f"{c}={s}" for c, s in image_shapes.items())
                raise CreationError(
                    f"subject {subject.subject_id!r} has inconsistent spatial shapes: {detail}"
                )
        file_bytes = writer.finalize(metadata)
    except BaseException:
        writer.abort()
        if os.path.exists(out_path):
            os.unlink(out_path)
        raise
    return ContainerSummary(
        path=out_path,
        subjects=len(plan.subjects),
        categories=category_order,
        payload_bytes=writer.payload_bytes,
        file_bytes=file_bytes,
        metadata_only=plan.metadata_only,
    )


def create_metadata_dataset(plan: CreationPlan, out_path: str) -> ContainerSummary:
    """Write a container holding only identifiers, paths, shapes and geometry;
    payloads load from the file system on demand."""
    meta_plan = CreationPlan(
        subjects=plan.subjects,
        names=plan.names,
        transforms=plan.transforms,
        record_hashes=plan.record_hashes,
        metadata_only=True,
        name=plan.name,
    )
    return create_dataset(meta_plan, out_path)


def metadata_from_plan(plan: CreationPlan) -> DatasetMetadata:
    """The metadata block a metadata-only container of this plan would hold,
    built in memory (header reads only, nothing written)."""
    seen = set()
    for subject in plan.subjects:
        if subject.subject_id in seen:
            raise CreationError(f"duplicate subject_id {subject.subject_id!r}")
        seen.add(subject.subject_id)
    metadata = DatasetMetadata(
        name=plan.name,
        metadata_only=True,
        subjects=[s.subject_id for s in plan.subjects],
        names={k: list(v) for k, v in plan.names.items()},
        transforms=[t.to_json() for t in plan.transforms],
    )
    for subject in plan.subjects:
        for category, value in subject.sources.items():
            if _is_path_value(value):
                paths = [value] if isinstance(value, str) else list(value)
                paths = [os.path.abspath(p) for p in paths]
                _, shape, dtype, geometry = _load_image_category(
                    subject.subject_id, category, paths, metadata_only=True
                )
                metadata.categories.append(
                    CategoryDescriptor(
                        subject_id=subject.subject_id,
                        category=category,
                        dtype=dtype,
                        shape=shape,
                        geometry=geometry,
                        source_paths=tuple(paths),
                    )
                )
            else:
                tensor = _inline_tensor(value)
                metadata.categories.append(
                    CategoryDescriptor(
                        subject_id=subject.subject_id,
                        category=category,
                        dtype=tensor.dtype.name,
                        shape=tensor.shape,
                        inline=[v.item() for v in tensor],
                    )
                )
    return metadata


def load_plan_toml(path: str) -> CreationPlan:
    """Parse the CLI creation config.

    Schema: [dataset] name; [names] category = [channel ids];
    [[transform]] kind/categories/params; [[subject]] id with
    [subject.files] category = path(s) and [subject.values] category = scalar.
    """
    with open(path, "rb") as fh:
        try:
            obj = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise FormatError(f"{path}: invalid TOML: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))

    def _resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    subjects = []
    for entry in obj.get("subject", []):
        if "id" not in entry:
            raise FormatError(f"{path}: [[subject]] entry without id")
        sources: dict = {}
        for category, value in entry.get("files", {}).items():
            if isinstance(value, str):
                sources[category] = _resolve(value)
            elif isinstance(value, list) and all(isinstance(v, str) for v in value):
                sources[category] = [_resolve(v) for v in value]
            else:
                raise FormatError(f"{path}: files.{category} must be a path or list of paths")
        for category, value in entry.get("values", {}).items():
            sources[category] = value
        subjects.append(SubjectPlan(subject_id=str(entry["id"]), sources=sources))

    transforms = []
    for entry in obj.get("transform", []):
        if "kind" not in entry:
            raise FormatError(f"{path}: [[transform]] entry without kind")
        categories = tuple(entry.get("categories", ["images"]))
        params = {k: v for k, v in entry.items() if k not in ("kind", "categories")}
        transforms.append(TransformSpec(entry["kind"], categories, params))

    return CreationPlan(
        subjects=subjects,
        names={k: list(v) for k, v in obj.get("names", {}).items()},
        transforms=transforms,
        name=obj.get("dataset", {}).get("name", ""),
    )
