"""Extractors: read one sample's worth of data for a sample spec.

Each extractor contributes named entries to the sample dict. Data-like
extractors read the sample's core region; the pad extractor reads the
enlarged region and fills out-of-bounds voxels, giving networks more input
context than output size.
"""

from __future__ import annotations

import numpy as np

from ..core import Region
from ..errors import ConfigurationError
from .indexing import SampleSpec


class Extractor:
    keys: tuple[str, ...] = ()
    requires: tuple[str, ...] = ()  # categories that must exist in the handle

    def extract(self, handle, subject_id: str, spec: SampleSpec) -> dict:
        raise NotImplementedError

    def validate(self, handle) -> None:
        for subject_id in handle.subjects:
            for category in self.requires:
                if not handle.has(subject_id, category):
                    raise ConfigurationError(
                        f"extractor needs category {category!r}, "
                        f"missing for subject {subject_id!r}"
                    )


def _read_padded(handle, subject_id: str, category: str, region: Region, mode: str) -> np.ndarray:
    """Read the in-bounds part of ``region`` and pad to its full size."""
    spatial = handle.spatial_shape(subject_id)
    lo = [max(s, 0) for s in region.start]
    hi = [min(s + n, e) for s, n, e in zip(region.start, region.size, spatial)]
    if any(l >= h for l, h in zip(lo, hi)):
        channels = handle.channels(category)
        arr = handle.read(subject_id, category, Region((0,) * len(spatial), (1,) * len(spatial)))
        return np.zeros(tuple(region.size) + (channels,), dtype=arr.dtype)
    inner = handle.read(
        subject_id, category, Region(tuple(lo), tuple(h - l for l, h in zip(lo, hi)))
    )
    widths = [(l - s, s + n - h) for s, n, l, h in zip(region.start, region.size, lo, hi)]
    if not any(w != (0, 0) for w in widths):
        return inner
    widths.append((0, 0))  # channel axis
    np_mode = "constant" if mode == "zero" else "symmetric"
    return np.pad(inner, widths, mode=np_mode)


class DataExtractor(Extractor):
    """The tensor of one category over the sample's core region."""

    def __init__(self, category: str = "images", key: str | None = None):
        self.category = category
        self.keys = (key or category,)
        self.requires = (category,)

    def extract(self, handle, subject_id, spec):
        core = spec.core()
        spatial = handle.spatial_shape(subject_id)
        if core.within(spatial):
            arr = handle.read(subject_id, self.category, core)
        elif spec.padded:
            arr = _read_padded(handle, subject_id, self.category, core, "zero")
        else:
            arr = handle.read(subject_id, self.category, core)  # raises range error
        return {self.keys[0]: arr}


class PadDataExtractor(Extractor):
    """The tensor over the sample's full (enlarged) region, out-of-bounds voxels
    filled by ``mode`` ("zero" or "mirror")."""

    def __init__(self, category: str = "images", mode: str = "zero", key: str | None = None):
        if mode not in ("zero", "mirror"):
            raise ConfigurationError(f"unknown pad mode {mode!r}")
        self.category = category
        self.mode = mode
        self.keys = (key or category,)
        self.requires = (category,)

    def extract(self, handle, subject_id, spec):
        return {
            self.keys[0]: _read_padded(handle, subject_id, self.category, spec.region, self.mode)
        }


class SelectiveDataExtractor(Extractor):
    """Like DataExtractor but keeps only the named channels."""

    def __init__(self, category: str, channels: tuple[str, ...], key: str | None = None):
        self.category = category
        self.channels = tuple(channels)
        self.keys = (key or category,)
        self.requires = (category,)

    def validate(self, handle):
        super().validate(handle)
        names = handle.names(self.category)
        missing = [c for c in self.channels if c not in names]
        if missing:
            raise ConfigurationError(
                f"channels {missing} not found in {self.category!r} names {names}"
            )

    def extract(self, handle, subject_id, spec):
        arr = DataExtractor(self.category).extract(handle, subject_id, spec)[self.category]
        names = handle.names(self.category)
        idx = [names.index(c) for c in self.channels]
        return {self.keys[0]: arr[..., idx]}


class SubjectIdExtractor(Extractor):
    keys = ("subject_id",)

    def extract(self, handle, subject_id, spec):
        return {"subject_id": subject_id}


class GeometryExtractor(Extractor):
    def __init__(self, category: str = "images"):
        self.category = category
        self.keys = ("geometry",)
        self.requires = (category,)

    def extract(self, handle, subject_id, spec):
        return {"geometry": handle.geometry(subject_id, self.category)}


class ShapeExtractor(Extractor):
    keys = ("shape",)

    def extract(self, handle, subject_id, spec):
        return {"shape": tuple(handle.spatial_shape(subject_id))}


class NamesExtractor(Extractor):
    def __init__(self, category: str = "images"):
        self.category = category
        self.keys = (f"{category}_names",)

    def extract(self, handle, subject_id, spec):
        return {self.keys[0]: handle.names(self.category)}
