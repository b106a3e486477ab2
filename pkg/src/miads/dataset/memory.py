"""In-memory dataset handle: the same read surface as a container, backed by
arrays already in memory. Useful for tests and for feeding predictions back
through the pipeline without touching disk."""

from __future__ import annotations

import numpy as np

from ..core import ImageGeometry, Region, check_tensor


class InMemoryHandle:
    def __init__(
        self,
        subjects: dict[str, dict[str, np.ndarray]],
        geometry: dict[str, dict[str, ImageGeometry]] | None = None,
        names: dict[str, list[str]] | None = None,
    ):
        self._subjects = list(subjects.keys())
        self._data = {k: dict(v) for k, v in subjects.items()}
        self._geometry = geometry or {}
        self._names = names or {}
        self._categories: list[str] = []
        for entries in self._data.values():
            for category, arr in entries.items():
                check_tensor(arr)
                if category not in self._categories:
                    self._categories.append(category)

    @property
    def subjects(self) -> list[str]:
        return list(self._subjects)

    @property
    def categories(self) -> list[str]:
        return list(self._categories)

    def has(self, subject_id: str, category: str) -> bool:
        return category in self._data.get(subject_id, {})

    def names(self, category: str) -> list[str]:
        return list(self._names.get(category, []))

    def geometry(self, subject_id: str, category: str) -> ImageGeometry | None:
        geo = self._geometry.get(subject_id, {}).get(category)
        if geo is None:
            arr = self._data[subject_id][category]
            if arr.ndim >= 2:
                return ImageGeometry.identity(arr.ndim - 1)
        return geo

    def spatial_shape(self, subject_id: str) -> tuple[int, ...]:
        for arr in self._data[subject_id].values():
            if arr.ndim >= 2:
                return arr.shape[:-1]
        raise KeyError(f"subject {subject_id!r} has no image category")

    def channels(self, category: str) -> int:
        arr = self._data[self._subjects[0]][category]
        if arr.ndim < 2:
            raise KeyError(f"category {category!r} is not an image category")
        return arr.shape[-1]

    def read(self, subject_id: str, category: str, region: Region | None = None) -> np.ndarray:
        try:
            arr = self._data[subject_id][category]
        except KeyError:
            raise KeyError(
                f"no entry for subject {subject_id!r}, category {category!r}"
            ) from None
        if region is None:
            return arr.copy()
        spatial = arr.shape[:-1]
        if region.ndim != len(spatial):
            raise IndexError(
                f"region rank {region.ndim} does not match spatial rank {len(spatial)}"
            )
        if not region.within(spatial):
            raise IndexError(f"region {region} out of bounds for shape {spatial}")
        slices = tuple(slice(s, s + n) for s, n in zip(region.start, region.size))
        return arr[slices].copy()

    def close(self) -> None:
        pass
