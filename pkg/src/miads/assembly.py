"""Reassembling per-sample predictions into full-resolution subject tensors.

Accumulation uses float64 sum and weight buffers per subject; overlapping
contributions are averaged, so the result is independent of submission order
and reduces to the identity when every voxel is covered exactly once.
add/assemble calls are internally synchronized (a single lock per assembler);
distinct subjects' buffers are independent.
"""

from __future__ import annotations

import threading

import numpy as np

from .access.indexing import SampleSpec
from .errors import AssemblyError, NotReadyError


class _Buffer:
    def __init__(self, spatial: tuple[int, ...], channels: int, expected: int):
        self.sum = np.zeros(spatial + (channels,), dtype=np.float64)
        self.weight = np.zeros(spatial, dtype=np.float64)
        self.expected = expected
        self.seen: set[int] = set()


class SubjectAssembler:
    """Accumulates predictions for every subject of a datasource, using the
    identical index table that produced the samples."""

    def __init__(self, datasource):
        self.datasource = datasource
        self._buffers: dict[str, _Buffer] = {}
        self._lock = threading.Lock()

    def _buffer(self, subject_id: str, channels: int) -> _Buffer:
        buf = self._buffers.get(subject_id)
        if buf is None:
            subject_index = self.datasource.subjects.index(subject_id)
            spatial = tuple(self.datasource.spatial_shapes[subject_index])
            expected = len(self.datasource.subject_samples(subject_id))
            buf = _Buffer(spatial, channels, expected)
            self._buffers[subject_id] = buf
        return buf

    def add(self, sample_index: int, prediction: np.ndarray) -> None:
        spec: SampleSpec = self.datasource.spec(sample_index)
        subject_id = self.datasource.subjects[spec.subject_index]
        core = spec.core()
        rank = core.ndim

        pred = np.asarray(prediction)
        if pred.ndim == rank:
            pred = pred[..., np.newaxis]
        if pred.ndim != rank + 1:
            raise AssemblyError(
                f"sample {sample_index}: prediction rank {pred.ndim} does not fit "
                f"spatial rank {rank}"
            )
        if pred.shape[:rank] == spec.region.size and any(spec.pad):
            # network emitted the padded input size; crop to the core first
            slices = tuple(slice(p, p + c) for p, c in zip(spec.pad, core.size))
            pred = pred[slices]
        if pred.shape[:rank] != core.size:
            raise AssemblyError(
                f"sample {sample_index}: prediction spatial shape {pred.shape[:rank]} "
                f"does not match the core region {core.size}"
            )

        with self._lock:
            buf = self._buffer(subject_id, pred.shape[-1])
            if pred.shape[-1] != buf.sum.shape[-1]:
                raise AssemblyError(
                    f"sample {sample_index}: channel count {pred.shape[-1]} differs from "
                    f"earlier predictions ({buf.sum.shape[-1]})"
                )
            spatial = buf.weight.shape
            dst = []
            src = []
            for s, n, e in zip(core.start, core.size, spatial):
                lo, hi = max(s, 0), min(s + n, e)
                if lo >= hi:
                    dst = None  # the whole core lies outside the image
                    break
                dst.append(slice(lo, hi))
                src.append(slice(lo - s, hi - s))
            if dst is not None:
                buf.sum[tuple(dst)] += pred[tuple(src)].astype(np.float64)
                buf.weight[tuple(dst)] += 1.0
            buf.seen.add(sample_index)

    def expected(self, subject_id: str) -> int:
        return len(self.datasource.subject_samples(subject_id))

    def received(self, subject_id: str) -> int:
        with self._lock:
            buf = self._buffers.get(subject_id)
            return len(buf.seen) if buf else 0

    def missing(self, subject_id: str) -> list[int]:
        with self._lock:
            seen = self._buffers[subject_id].seen if subject_id in self._buffers else set()
        return [i for i in self.datasource.subject_samples(subject_id) if i not in seen]

    def is_ready(self, subject_id: str) -> bool:
        return not self.missing(subject_id)

    def assemble(self, subject_id: str) -> np.ndarray:
        """The averaged float32 subject tensor; a pure read of the buffer."""
        missing = self.missing(subject_id)
        if missing:
            shown = ", ".join(str(i) for i in missing[:8])
            more = "" if len(missing) <= 8 else f" (+{len(missing) - 8} more)"
            raise NotReadyError(
                f"subject {subject_id!r} is missing predictions for samples [{shown}]{more}"
            )
        with self._lock:
            buf = self._buffers[subject_id]
            if np.any(buf.weight == 0):
                raise AssemblyError(
                    f"subject {subject_id!r} has uncovered voxels; the strategy does not "
                    "tile the full extent"
                )
            return (buf.sum / buf.weight[..., np.newaxis]).astype(np.float32)


def plane_assemble(assemblers, subject_id: str) -> np.ndarray:
    """Voxel-wise mean of the per-plane assembled tensors (2.5-D fusion).

    The fusion rule is a plain unweighted mean of plane outputs; callers who
    want majority voting can argmax afterward.
    """
    assembled = []
    for plane, assembler in enumerate(assemblers):
        if not assembler.is_ready(subject_id):
            raise NotReadyError(f"plane {plane} is incomplete for subject {subject_id!r}")
        assembled.append(assembler.assemble(subject_id).astype(np.float64))
    return (sum(assembled) / len(assembled)).astype(np.float32)
