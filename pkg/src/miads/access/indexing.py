"""Indexing strategies: rules that turn per-subject spatial shapes into an
ordered, densely numbered table of extractable sample regions.

Swapping the strategy changes only this table; extractors and transforms are
untouched, which is what makes a 2-D/3-D/patch switch a one-line change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..core import Region
from ..errors import ConfigurationError


@dataclass(frozen=True)
class SampleSpec:
    """One sample: the subject it came from and the region to extract.

    ``region`` is the read region handed to extractors. For padded-patch
    strategies it already includes ``pad`` on every side, so the assembly core
    is ``region.shrink(pad)``. ``padded`` marks regions that may reach outside
    the image and are completed by padding at extraction time.
    """

    sample_index: int
    subject_index: int
    region: Region
    pad: tuple[int, ...] = ()
    padded: bool = False
    plane: int | None = None

    def core(self) -> Region:
        if self.pad and any(self.pad):
            return self.region.shrink(self.pad)
        return self.region


class IndexingStrategy:
    def regions(self, shape: tuple[int, ...]):
        """Yield (region, pad, padded, plane) tuples for one subject."""
        raise NotImplementedError


class EmptyIndexing(IndexingStrategy):
    """One sample per subject covering the full extent (raw-format use case)."""

    def regions(self, shape):
        yield Region((0,) * len(shape), shape), (0,) * len(shape), False, None


@dataclass(frozen=True)
class SliceIndexing(IndexingStrategy):
    """One sample per position along ``axis`` (2-D slices of a 3-D image)."""

    axis: int = 0

    def regions(self, shape):
        if not 0 <= self.axis < len(shape):
            raise ConfigurationError(f"slice axis {self.axis} out of range for shape {shape}")
        size = tuple(1 if d == self.axis else e for d, e in enumerate(shape))
        zeros = (0,) * len(shape)
        for pos in range(shape[self.axis]):
            start = tuple(pos if d == self.axis else 0 for d in range(len(shape)))
            yield Region(start, size), zeros, False, self.axis


def _grid_starts(extent: int, step: int) -> list[int]:
    return [i * step for i in range(max(1, math.ceil(extent / step)))]


@dataclass(frozen=True)
class PatchIndexing(IndexingStrategy):
    """Non-overlapping grid of fixed-shape patches (ceil-division tiling).

    Boundary patches keep the nominal shape and are zero-padded at extraction;
    assembly drops the out-of-bounds part, so every voxel is covered exactly
    once. An optional ``step`` smaller than ``shape`` yields overlapping
    patches; assembly then averages the overlaps.
    """

    shape: tuple[int, ...]
    step: tuple[int, ...] | None = None

    def __post_init__(self):
        if any(s < 1 for s in self.shape):
            raise ConfigurationError(f"patch shape must be >= 1, got {self.shape}")
        if self.step is not None:
            if len(self.step) != len(self.shape):
                raise ConfigurationError("step and shape must have the same rank")
            if any(s < 1 for s in self.step):
                raise ConfigurationError(f"step must be >= 1, got {self.step}")
            if any(st > sh for st, sh in zip(self.step, self.shape)):
                raise ConfigurationError(
                    "step larger than the patch shape would leave uncovered voxels"
                )

    def regions(self, shape):
        if len(self.shape) != len(shape):
            raise ConfigurationError(
                f"patch rank {len(self.shape)} does not match image rank {len(shape)}"
            )
        if any(p > e for p, e in zip(self.shape, shape)):
            raise ConfigurationError(
                f"patch shape {self.shape} exceeds image shape {shape}; "
                "use a padded-patch strategy for oversized inputs"
            )
        step = self.step or self.shape
        zeros = (0,) * len(shape)
        axes = [_grid_starts(e, st) for e, st in zip(shape, step)]
        for start in _product(axes):
            padded = any(s + p > e for s, p, e in zip(start, self.shape, shape))
            yield Region(tuple(start), self.shape), zeros, padded, None


@dataclass(frozen=True)
class PaddedPatchIndexing(IndexingStrategy):
    """Patch grid over ``core_shape`` with the read region enlarged by
    ``pad`` per side, for networks whose input is larger than their output."""

    core_shape: tuple[int, ...]
    pad: tuple[int, ...]

    def __post_init__(self):
        if any(s < 1 for s in self.core_shape):
            raise ConfigurationError(f"core shape must be >= 1, got {self.core_shape}")
        if len(self.pad) != len(self.core_shape):
            raise ConfigurationError("pad and core_shape must have the same rank")
        if any(p < 0 for p in self.pad):
            raise ConfigurationError(f"pad must be >= 0, got {self.pad}")

    def regions(self, shape):
        if len(self.core_shape) != len(shape):
            raise ConfigurationError(
                f"patch rank {len(self.core_shape)} does not match image rank {len(shape)}"
            )
        axes = [_grid_starts(e, st) for e, st in zip(shape, self.core_shape)]
        size = tuple(c + 2 * p for c, p in zip(self.core_shape, self.pad))
        for core_start in _product(axes):
            start = tuple(s - p for s, p in zip(core_start, self.pad))
            yield Region(start, size), tuple(self.pad), True, None


def _product(axes: list[list[int]]):
    if not axes:
        yield ()
        return
    for head in axes[0]:
        for tail in _product(axes[1:]):
            yield (head,) + tail


def build_index(shapes: list[tuple[int, ...]], strategy: IndexingStrategy) -> list[SampleSpec]:
    """The full sample table, subject-major, densely numbered from zero."""
    if not shapes:
        raise ConfigurationError("cannot index an empty set of subjects")
    specs: list[SampleSpec] = []
    for subject_index, shape in enumerate(shapes):
        for region, pad, padded, plane in strategy.regions(tuple(shape)):
            specs.append(
                SampleSpec(
                    sample_index=len(specs),
                    subject_index=subject_index,
                    region=region,
                    pad=pad,
                    padded=padded,
                    plane=plane,
                )
            )
    return specs
