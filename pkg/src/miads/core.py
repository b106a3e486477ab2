"""Foundational tensor, geometry, and region types.

Tensors are plain C-order numpy arrays restricted to four element types:
uint8 (labels, masks, codes), int32 (counters), float32 and float64
(image intensities and derived values). All spatial indexing is
slowest-varying first, so a 3-D image is (z, y, x) and an optional
trailing channel axis is never part of a spatial region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SUPPORTED_DTYPES = ("uint8", "int32", "float32", "float64")

MAX_DIMS = 5


def check_tensor(arr: np.ndarray) -> np.ndarray:
    """Validate dtype and rank; returns the array unchanged."""
    if arr.dtype.name not in SUPPORTED_DTYPES:
        raise ValueError(
            f"unsupported element type {arr.dtype.name!r}; expected one of {SUPPORTED_DTYPES}"
        )
    if not 1 <= arr.ndim <= MAX_DIMS:
        raise ValueError(f"tensor must have 1..{MAX_DIMS} dimensions, got {arr.ndim}")
    return arr


@dataclass(frozen=True)
class ImageGeometry:
    """Physical image information: per-axis spacing (mm), origin (mm) and an
    orthonormal direction matrix (flattened row-major). Axis order matches the
    tensor's spatial axes (slowest-varying first)."""

    spacing: tuple[float, ...]
    origin: tuple[float, ...] = ()
    direction: tuple[float, ...] = ()

    def __post_init__(self):
        spacing = tuple(float(s) for s in self.spacing)
        n = len(spacing)
        origin = tuple(float(o) for o in self.origin) if self.origin else (0.0,) * n
        direction = (
            tuple(float(d) for d in self.direction)
            if self.direction
            else tuple(np.eye(n).ravel())
        )
        if any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be strictly positive, got {spacing}")
        if len(origin) != n:
            raise ValueError("origin and spacing must have the same length")
        if len(direction) != n * n:
            raise ValueError(f"direction must hold {n}x{n} entries, got {len(direction)}")
        det = float(np.linalg.det(np.asarray(direction, dtype=np.float64).reshape(n, n)))
        if abs(abs(det) - 1.0) > 1e-6:
            raise ValueError(f"direction matrix must be orthonormal (|det|==1), det={det}")
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)

    @property
    def ndim(self) -> int:
        return len(self.spacing)

    def direction_matrix(self) -> np.ndarray:
        n = self.ndim
        return np.asarray(self.direction, dtype=np.float64).reshape(n, n)

    @classmethod
    def identity(cls, ndim: int) -> "ImageGeometry":
        return cls(spacing=(1.0,) * ndim)


@dataclass(frozen=True)
class Region:
    """A rectangular spatial sub-region: per-axis offsets and extents.

    Negative offsets (or offsets reaching past the image bounds) are legal
    only for regions produced by padded extraction strategies; strict reads
    reject them.
    """

    start: tuple[int, ...]
    size: tuple[int, ...]

    def __post_init__(self):
        start = tuple(int(s) for s in self.start)
        size = tuple(int(s) for s in self.size)
        if len(start) != len(size):
            raise ValueError("start and size must have the same length")
        if any(s < 1 for s in size):
            raise ValueError(f"region size must be >= 1 on every axis, got {size}")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "size", size)

    @property
    def ndim(self) -> int:
        return len(self.start)

    def stop(self) -> tuple[int, ...]:
        return tuple(s + n for s, n in zip(self.start, self.size))

    def within(self, shape: tuple[int, ...]) -> bool:
        return all(0 <= s and s + n <= e for s, n, e in zip(self.start, self.size, shape))

    def shrink(self, pad: tuple[int, ...]) -> "Region":
        """The core region of a padded one: offsets moved in, extents reduced."""
        start = tuple(s + p for s, p in zip(self.start, pad))
        size = tuple(n - 2 * p for n, p in zip(self.size, pad))
        return Region(start, size)


@dataclass
class SubjectRecord:
    """One subject's in-memory data: category name -> tensor or scalar payload,
    plus per-image-category geometry."""

    subject_id: str
    entries: dict = field(default_factory=dict)
    geometry: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.subject_id:
            raise ValueError("subject_id must be non-empty")


def linear_offset(shape: tuple[int, ...], index: tuple[int, ...]) -> int:
    """C-order flat offset of a multi-index; bijective over valid indices."""
    if len(shape) != len(index):
        raise IndexError(f"index rank {len(index)} does not match shape rank {len(shape)}")
    offset = 0
    for e, i in zip(shape, index):
        if not 0 <= i < e:
            raise IndexError(f"index {index} out of bounds for shape {shape}")
        offset = offset * e + i
    return offset


def voxel_volume(geometry: ImageGeometry) -> float:
    """Physical volume of one voxel in mm^3 (product of spacings)."""
    return float(math.prod(geometry.spacing))


def _reflect_indices(start: int, size: int, extent: int) -> np.ndarray:
    """Source indices for mirror padding: the sequence start..start+size-1
    folded back into [0, extent) by repeated reflection at the borders
    (edge voxel included, i.e. -1 maps to 0)."""
    idx = np.arange(start, start + size)
    period = 2 * extent
    idx = np.mod(idx, period)
    idx = np.where(idx < 0, idx + period, idx)
    return np.where(idx < extent, idx, period - 1 - idx)


def extract_subtensor(
    tensor: np.ndarray,
    start: tuple[int, ...],
    size: tuple[int, ...],
    pad_mode: str = "zero",
) -> np.ndarray:
    """Copy a rectangular sub-region of the leading len(start) axes.

    Trailing axes (channels) are copied whole. Out-of-bounds elements are
    filled according to ``pad_mode`` ("zero" or "mirror"); in-bounds elements
    equal the source.
    """
    rank = len(start)
    if len(size) != rank:
        raise ValueError("start and size must have the same length")
    if rank > tensor.ndim:
        raise ValueError(f"region rank {rank} exceeds tensor rank {tensor.ndim}")
    if any(s < 1 for s in size):
        raise ValueError(f"size must be >= 1 on every axis, got {tuple(size)}")
    if pad_mode not in ("zero", "mirror"):
        raise ValueError(f"unknown pad_mode {pad_mode!r}")

    src_shape = tensor.shape[:rank]
    if pad_mode == "mirror":
        index_vectors = [
            _reflect_indices(s, n, e) for s, n, e in zip(start, size, src_shape)
        ]
        index_vectors += [np.arange(e) for e in tensor.shape[rank:]]
        return tensor[np.ix_(*index_vectors)].copy()

    out = np.zeros(tuple(size) + tensor.shape[rank:], dtype=tensor.dtype)
    src_slices = []
    dst_slices = []
    for s, n, e in zip(start, size, src_shape):
        lo = max(s, 0)
        hi = min(s + n, e)
        if lo >= hi:
            return out  # no overlap with the source at all
        src_slices.append(slice(lo, hi))
        dst_slices.append(slice(lo - s, hi - s))
    out[tuple(dst_slices)] = tensor[tuple(src_slices)]
    return out
