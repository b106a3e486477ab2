"""Opening, inspecting, and partially reading dataset containers.

Full containers serve region reads with positioned reads (os.pread) so that
multiple workers can read concurrently without a shared cursor: an axis-0
slice is a single contiguous read, an n-D patch needs at most one read per
contained row. Metadata-only containers load the owning source files instead
and crop in memory, replaying any write-time transforms.
"""

from __future__ import annotations

import os

import numpy as np

from ..core import ImageGeometry, Region
from ..errors import CorruptFileError, DanglingSourceError, MiadsError
from ..imageio import read_image
from .container import CategoryDescriptor, DatasetMetadata, read_metadata
from .creation import TransformSpec, apply_payload_transform


class DatasetHandle:
    """Read access to one container; see open_dataset."""

    def __init__(self, path: str, metadata: DatasetMetadata):
        self.path = path
        self.metadata = metadata
        self._by_key: dict[tuple[str, str], CategoryDescriptor] = {}
        self._categories: list[str] = []
        for desc in metadata.categories:
            self._by_key[(desc.subject_id, desc.category)] = desc
            if desc.category not in self._categories:
                self._categories.append(desc.category)
        self._fd: int | None = None
        if not metadata.metadata_only:
            self._fd = os.open(path, os.O_RDONLY)
        self._transforms: dict[str, list[TransformSpec]] = {}
        for obj in metadata.transforms:
            spec = TransformSpec.from_json(obj)
            for category in spec.categories:
                self._transforms.setdefault(category, []).append(spec)

    # -- structure ---------------------------------------------------------

    @property
    def subjects(self) -> list[str]:
        return list(self.metadata.subjects)

    @property
    def categories(self) -> list[str]:
        return list(self._categories)

    def descriptor(self, subject_id: str, category: str) -> CategoryDescriptor:
        try:
            return self._by_key[(subject_id, category)]
        except KeyError:
            raise KeyError(f"no entry for subject {subject_id!r}, category {category!r}") from None

    def has(self, subject_id: str, category: str) -> bool:
        return (subject_id, category) in self._by_key

    def names(self, category: str) -> list[str]:
        return list(self.metadata.names.get(category, []))

    def geometry(self, subject_id: str, category: str) -> ImageGeometry | None:
        return self.descriptor(subject_id, category).geometry

    def image_categories(self) -> list[str]:
        return [
            c
            for c in self._categories
            if self.metadata.subjects
            and self._by_key[(self.metadata.subjects[0], c)].geometry is not None
        ]

    def spatial_shape(self, subject_id: str) -> tuple[int, ...]:
        for category in self._categories:
            desc = self._by_key[(subject_id, category)]
            if desc.geometry is not None:
                return desc.shape[:-1]
        raise KeyError(f"subject {subject_id!r} has no image category")

    def channels(self, category: str) -> int:
        if not self.metadata.subjects:
            raise KeyError("empty dataset")
        desc = self._by_key[(self.metadata.subjects[0], category)]
        if desc.geometry is None:
            raise KeyError(f"category {category!r} is not an image category")
        return desc.shape[-1]

    # -- reading -----------------------------------------------------------

    def read(self, subject_id: str, category: str, region: Region | None = None) -> np.ndarray:
        desc = self.descriptor(subject_id, category)
        if region is not None:
            if desc.geometry is None:
                raise ValueError(f"category {category!r} holds no image; read it whole")
            spatial = desc.shape[:-1]
            if region.ndim != len(spatial):
                raise IndexError(
                    f"region rank {region.ndim} does not match spatial rank {len(spatial)}"
                )
            if not region.within(spatial):
                raise IndexError(f"region {region} out of bounds for shape {spatial}")
        if self.metadata.metadata_only:
            return self._read_from_sources(desc, region)
        return self._read_from_container(desc, region)

    def _read_from_container(self, desc: CategoryDescriptor, region: Region | None) -> np.ndarray:
        dtype = np.dtype(desc.dtype)
        if region is None:
            raw = os.pread(self._fd, desc.nbytes, desc.byte_offset)
            if len(raw) != desc.nbytes:
                raise CorruptFileError(f"{self.path}: payload truncated")
            return np.frombuffer(raw, dtype=dtype).reshape(desc.shape).copy()

        spatial = desc.shape[:-1]
        channels = desc.shape[-1]
        rank = len(spatial)
        # widest fully-covered suffix of axes collapses into one contiguous run
        t = rank
        while t > 0 and region.start[t - 1] == 0 and region.size[t - 1] == spatial[t - 1]:
            t -= 1
        strides = [0] * rank  # element strides of the stored (spatial + C) block
        acc = channels
        for axis in range(rank - 1, -1, -1):
            strides[axis] = acc
            acc *= spatial[axis]
        if t == 0:
            run_elems = acc  # everything
            outer_shape: tuple[int, ...] = ()
            unit_axis = None
        else:
            unit_axis = t - 1
            run_elems = region.size[unit_axis] * strides[unit_axis]
            outer_shape = region.size[:unit_axis]

        out = np.empty(tuple(region.size) + (channels,), dtype=dtype)
        flat = out.reshape(-1)
        run_bytes = run_elems * dtype.itemsize
        base = desc.byte_offset
        pos = 0
        for combo in np.ndindex(*outer_shape):
            offset = 0
            for axis, i in enumerate(combo):
                offset += (region.start[axis] + i) * strides[axis]
            if unit_axis is not None:
                offset += region.start[unit_axis] * strides[unit_axis]
            raw = os.pread(self._fd, run_bytes, base + offset * dtype.itemsize)
            if len(raw) != run_bytes:
                raise CorruptFileError(f"{self.path}: payload truncated")
            flat[pos : pos + run_elems] = np.frombuffer(raw, dtype=dtype)
            pos += run_elems
        return out

    def _read_from_sources(self, desc: CategoryDescriptor, region: Region | None) -> np.ndarray:
        if desc.inline is not None:
            arr = np.asarray(desc.inline, dtype=np.dtype(desc.dtype))
            return arr.reshape(desc.shape)
        arrays = []
        for path in desc.source_paths:
            try:
                arr, _ = read_image(path)
            except FileNotFoundError:
                raise DanglingSourceError(f"source file no longer exists: {path}") from None
            arrays.append(arr)
        tensor = np.stack(arrays, axis=-1)
        if tensor.shape != desc.shape:
            raise CorruptFileError(
                f"source files for {desc.subject_id}/{desc.category} changed shape: "
                f"{tensor.shape} != {desc.shape}"
            )
        for spec in self._transforms.get(desc.category, ()):
            tensor = apply_payload_transform(tensor, spec)
        if tensor.dtype.name != desc.dtype:
            raise CorruptFileError(
                f"source files for {desc.subject_id}/{desc.category} changed dtype"
            )
        if region is None:
            return tensor
        slices = tuple(slice(s, s + n) for s, n in zip(region.start, region.size))
        return tensor[slices].copy()

    # -- lifecycle ---------------------------------------------------------

    def close(self) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None

    def __enter__(self) -> "DatasetHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_dataset(path: str) -> DatasetHandle:
    file_size = os.path.getsize(path)
    with open(path, "rb") as fh:
        metadata = read_metadata(fh, file_size)
    if metadata.format_version != 1:
        raise MiadsError(f"unsupported metadata version {metadata.format_version}")
    if not metadata.metadata_only:
        for desc in metadata.categories:
            if desc.byte_offset is None or desc.byte_offset + desc.nbytes > file_size:
                raise CorruptFileError(
                    f"{path}: payload of {desc.subject_id}/{desc.category} out of bounds"
                )
    return DatasetHandle(path, metadata)


def read_region(
    handle: DatasetHandle, subject_id: str, category: str, region: Region | None = None
) -> np.ndarray:
    return handle.read(subject_id, category, region)


def inspect_dataset(handle: DatasetHandle) -> dict:
    """Structured listing mirroring the container tree: data/<categories> and
    meta/{subjects, files, info, names, shape}."""
    meta = handle.metadata
    data: dict = {}
    info: dict = {}
    shapes: dict = {}
    for desc in meta.categories:
        data.setdefault(desc.category, []).append(
            {"subject_id": desc.subject_id, "dtype": desc.dtype, "shape": list(desc.shape)}
        )
        if desc.geometry is not None:
            info.setdefault(desc.subject_id, {})[desc.category] = {
                "spacing": list(desc.geometry.spacing),
                "origin": list(desc.geometry.origin),
                "direction": list(desc.geometry.direction),
            }
            shapes.setdefault(desc.subject_id, {})[desc.category] = list(desc.shape)
    return {
        "name": meta.name,
        "format_version": meta.format_version,
        "metadata_only": meta.metadata_only,
        "path": handle.path,
        "data": data,
        "meta": {
            "subjects": list(meta.subjects),
            "files": [p.to_json() for p in meta.provenance],
            "info": info,
            "names": {k: list(v) for k, v in meta.names.items()},
            "shape": shapes,
        },
    }
