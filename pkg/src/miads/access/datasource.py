"""The datasource: an indexed, immutable sequence of training samples.

A datasource binds a dataset handle to an indexing strategy, extractors and
transforms. Retrieval is reentrant and safe for concurrent callers; all
randomness is derived per sample from the datasource seed.
"""

from __future__ import annotations

import os

import numpy as np

from ..dataset.container import DatasetMetadata
from ..dataset.creation import CreationPlan, metadata_from_plan
from ..dataset.handle import DatasetHandle, open_dataset
from ..errors import ConfigurationError
from .extractors import Extractor
from .indexing import IndexingStrategy, SampleSpec, SliceIndexing, build_index
from .transforms import SampleTransform


class Datasource:
    def __init__(
        self,
        handle,
        strategy: IndexingStrategy,
        extractors: list[Extractor],
        transforms: list[SampleTransform] | tuple = (),
        seed: int = 0,
    ):
        if not extractors:
            raise ConfigurationError("at least one extractor is required")
        self.handle = handle
        self.strategy = strategy
        self.extractors = list(extractors)
        self.transforms = list(transforms)
        self.seed = int(seed)
        self.subjects = list(handle.subjects)
        if not self.subjects:
            raise ConfigurationError("the dataset holds no subjects")

        seen: set[str] = set()
        for extractor in self.extractors:
            extractor.validate(handle)
            for key in extractor.keys:
                if key in seen:
                    raise ConfigurationError(f"duplicate sample key {key!r}")
                seen.add(key)
        for transform in self.transforms:
            for key in transform.required_keys:
                if key not in seen:
                    raise ConfigurationError(
                        f"transform {type(transform).__name__} needs sample key {key!r}, "
                        f"but no extractor provides it"
                    )

        self.spatial_shapes = [handle.spatial_shape(s) for s in self.subjects]
        self.specs: list[SampleSpec] = build_index(self.spatial_shapes, strategy)
        self._by_subject: dict[int, list[int]] = {}
        for spec in self.specs:
            self._by_subject.setdefault(spec.subject_index, []).append(spec.sample_index)

    def __len__(self) -> int:
        return len(self.specs)

    def spec(self, sample_index: int) -> SampleSpec:
        return self.specs[sample_index]

    def subject_samples(self, subject_id: str) -> list[int]:
        return list(self._by_subject.get(self.subjects.index(subject_id), []))

    def get_sample(self, sample_index: int) -> dict:
        if not 0 <= sample_index < len(self.specs):
            raise IndexError(f"sample index {sample_index} out of range [0, {len(self.specs)})")
        spec = self.specs[sample_index]
        subject_id = self.subjects[spec.subject_index]
        sample: dict = {}
        for extractor in self.extractors:
            sample.update(extractor.extract(self.handle, subject_id, spec))
        for transform in self.transforms:
            sample = transform.apply(sample, spec, self.seed)
        return sample

    def __getitem__(self, sample_index: int) -> dict:
        return self.get_sample(sample_index)


def filesystem_datasource(
    source,
    strategy: IndexingStrategy,
    extractors: list[Extractor],
    transforms=(),
    seed: int = 0,
) -> Datasource:
    """A datasource that loads payloads from the file system.

    ``source`` is either the path of a metadata container or a CreationPlan;
    in both cases only shapes/paths are needed up front, and the resulting
    samples are identical to a container-backed datasource built from the
    same plan.
    """
    if isinstance(source, CreationPlan):
        metadata = metadata_from_plan(source)
        handle = DatasetHandle("<memory>", metadata)
    elif isinstance(source, (str, os.PathLike)):
        handle = open_dataset(os.fspath(source))
    else:
        raise ConfigurationError(f"unsupported datasource source {type(source).__name__}")
    return Datasource(handle, strategy, extractors, transforms, seed)


def plane_datasources(
    handle, extractors: list[Extractor], transforms=(), seed: int = 0
) -> tuple[Datasource, Datasource, Datasource]:
    """Three slice datasources, one per anatomical plane (axes 0, 1, 2),
    for 2.5-D processing with plane-fused assembly."""
    return tuple(
        Datasource(handle, SliceIndexing(axis), extractors, transforms, seed)
        for axis in range(3)
    )
