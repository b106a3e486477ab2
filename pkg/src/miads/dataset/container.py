"""On-disk container format: fixed header, aligned raw payloads, JSON metadata.

Layout:
    bytes 0..7    magic  b"MIADS\\x00\\x01\\x00"  (last two bytes: format version, LE u16)
    bytes 8..15   meta_offset  u64 little-endian
    bytes 16..23  meta_length  u64 little-endian
    ...           tensor payloads, each C-order raw bytes at a 64-byte aligned offset
    meta_offset.. UTF-8 JSON metadata block

The file is fully deterministic: no timestamps, canonical key order, zero
padding between payloads.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..core import ImageGeometry
from ..errors import CorruptFileError, NotADatasetError, VersionError

MAGIC = b"MIADS\x00\x01\x00"
MAGIC_STEM = MAGIC[:6]
FORMAT_VERSION = 1
ALIGNMENT = 64
_HEADER = struct.Struct("<8sQQ")


@dataclass
class CategoryDescriptor:
    """Placement and typing of one (subject, category) tensor."""

    subject_id: str
    category: str
    dtype: str
    shape: tuple[int, ...]
    byte_offset: int | None = None  # None in metadata-only containers
    geometry: ImageGeometry | None = None
    source_paths: tuple[str, ...] = ()
    inline: list | None = None  # small non-image payloads, kept in the metadata

    @property
    def nbytes(self) -> int:
        return int(np.prod(self.shape)) * np.dtype(self.dtype).itemsize

    def to_json(self) -> dict:
        geo = None
        if self.geometry is not None:
            geo = {
                "spacing": list(self.geometry.spacing),
                "origin": list(self.geometry.origin),
                "direction": list(self.geometry.direction),
            }
        return {
            "subject_id": self.subject_id,
            "category": self.category,
            "dtype": self.dtype,
            "shape": list(self.shape),
            "byte_offset": self.byte_offset,
            "geometry": geo,
            "source_paths": list(self.source_paths),
            "inline": self.inline,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CategoryDescriptor":
        geo = obj.get("geometry")
        geometry = None
        if geo is not None:
            geometry = ImageGeometry(
                spacing=tuple(geo["spacing"]),
                origin=tuple(geo["origin"]),
                direction=tuple(geo["direction"]),
            )
        return cls(
            subject_id=obj["subject_id"],
            category=obj["category"],
            dtype=obj["dtype"],
            shape=tuple(obj["shape"]),
            byte_offset=obj["byte_offset"],
            geometry=geometry,
            source_paths=tuple(obj.get("source_paths", ())),
            inline=obj.get("inline"),
        )


@dataclass
class ProvenanceEntry:
    subject_id: str
    category: str
    source_path: str
    sha256: str | None = None

    def to_json(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "category": self.category,
            "source_path": self.source_path,
            "sha256": self.sha256,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProvenanceEntry":
        return cls(obj["subject_id"], obj["category"], obj["source_path"], obj.get("sha256"))


@dataclass
class DatasetMetadata:
    format_version: int = FORMAT_VERSION
    name: str = ""
    metadata_only: bool = False
    subjects: list[str] = field(default_factory=list)
    names: dict[str, list[str]] = field(default_factory=dict)
    transforms: list[dict] = field(default_factory=list)
    categories: list[CategoryDescriptor] = field(default_factory=list)
    provenance: list[ProvenanceEntry] = field(default_factory=list)

    def to_bytes(self) -> bytes:
        obj = {
            "format_version": self.format_version,
            "name": self.name,
            "metadata_only": self.metadata_only,
            "subjects": self.subjects,
            "names": self.names,
            "transforms": self.transforms,
            "categories": [c.to_json() for c in self.categories],
            "provenance": [p.to_json() for p in self.provenance],
        }
        return json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_bytes(cls, payload: bytes) -> "DatasetMetadata":
        try:
            obj = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptFileError("metadata block is not valid JSON") from exc
        return cls(
            format_version=obj["format_version"],
            name=obj.get("name", ""),
            metadata_only=obj.get("metadata_only", False),
            subjects=list(obj["subjects"]),
            names={k: list(v) for k, v in obj.get("names", {}).items()},
            transforms=list(obj.get("transforms", [])),
            categories=[CategoryDescriptor.from_json(c) for c in obj["categories"]],
            provenance=[ProvenanceEntry.from_json(p) for p in obj.get("provenance", [])],
        )


@dataclass
class ContainerSummary:
    path: str
    subjects: int
    categories: list[str]
    payload_bytes: int
    file_bytes: int
    metadata_only: bool


class ContainerWriter:
    """Single-writer, append-only container construction."""

    def __init__(self, path: str):
        self._path = path
        self._fh = open(path, "wb")
        self._fh.write(_HEADER.pack(MAGIC, 0, 0))
        self.payload_bytes = 0

    def append(self, arr: np.ndarray) -> int:
        pos = self._fh.tell()
        pad = (ALIGNMENT - pos % ALIGNMENT) % ALIGNMENT
        if pad:
            self._fh.write(b"\x00" * pad)
        offset = pos + pad
        data = np.ascontiguousarray(arr).tobytes()
        self._fh.write(data)
        self.payload_bytes += len(data)
        return offset

    def finalize(self, metadata: DatasetMetadata) -> int:
        payload = metadata.to_bytes()
        meta_offset = self._fh.tell()
        self._fh.write(payload)
        file_bytes = self._fh.tell()
        self._fh.seek(0)
        self._fh.write(_HEADER.pack(MAGIC, meta_offset, len(payload)))
        self._fh.close()
        return file_bytes

    def abort(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def read_container_header(fh) -> tuple[int, int]:
    """Validate magic and return (meta_offset, meta_length)."""
    raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise NotADatasetError("file too short to be a dataset container")
    magic, meta_offset, meta_length = _HEADER.unpack(raw)
    if magic[:6] != MAGIC_STEM:
        raise NotADatasetError("bad magic: not a dataset container")
    if magic != MAGIC:
        (version,) = struct.unpack("<H", magic[6:8])
        raise VersionError(f"container format version {version} is not supported")
    return meta_offset, meta_length


def read_metadata(fh, file_size: int) -> DatasetMetadata:
    meta_offset, meta_length = read_container_header(fh)
    if meta_offset + meta_length > file_size or meta_offset < _HEADER.size or meta_length == 0:
        raise CorruptFileError("metadata block lies outside the file bounds")
    fh.seek(meta_offset)
    payload = fh.read(meta_length)
    if len(payload) != meta_length:
        raise CorruptFileError("metadata block truncated")
    return DatasetMetadata.from_bytes(payload)
