"""Sample transforms, applied left-to-right after extraction.

Randomized transforms derive their generator from (datasource seed,
sample_index), so augmentation is reproducible no matter how data-loader
workers schedule the calls.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .indexing import SampleSpec


class SampleTransform:
    required_keys: tuple[str, ...] = ()

    def apply(self, sample: dict, spec: SampleSpec, seed: int) -> dict:
        raise NotImplementedError


class ZNormalize(SampleTransform):
    """Zero-mean, unit-std per channel over the extracted region (channels
    last). Constant channels are only mean-shifted."""

    def __init__(self, keys: tuple[str, ...] = ("images",)):
        self.keys = tuple(keys)
        self.required_keys = self.keys

    def apply(self, sample, spec, seed):
        for key in self.keys:
            arr = sample[key].astype(np.float64)
            for c in range(arr.shape[-1]):
                channel = arr[..., c]
                mean = channel.mean()
                std = channel.std()
                arr[..., c] = (channel - mean) / std if std > 0 else channel - mean
            sample[key] = arr.astype(sample[key].dtype if sample[key].dtype.kind == "f" else np.float32)
        return sample


class RescaleIntensity(SampleTransform):
    """Linearly map each channel's value range onto [out_min, out_max]."""

    def __init__(self, out_min: float = 0.0, out_max: float = 1.0, keys: tuple[str, ...] = ("images",)):
        self.out_min = float(out_min)
        self.out_max = float(out_max)
        self.keys = tuple(keys)
        self.required_keys = self.keys

    def apply(self, sample, spec, seed):
        for key in self.keys:
            arr = sample[key].astype(np.float64)
            for c in range(arr.shape[-1]):
                channel = arr[..., c]
                cmin, cmax = channel.min(), channel.max()
                if cmax > cmin:
                    arr[..., c] = (channel - cmin) / (cmax - cmin) * (
                        self.out_max - self.out_min
                    ) + self.out_min
                else:
                    arr[..., c] = self.out_min
            sample[key] = arr.astype(
                sample[key].dtype if sample[key].dtype.kind == "f" else np.float32
            )
        return sample


class ApplyMask(SampleTransform):
    """Zero intensities outside the mask (mask must be extracted too)."""

    def __init__(self, mask_key: str = "mask", keys: tuple[str, ...] = ("images",)):
        self.mask_key = mask_key
        self.keys = tuple(keys)
        self.required_keys = self.keys + (mask_key,)

    def apply(self, sample, spec, seed):
        mask = sample[self.mask_key]
        binary = (mask != 0).astype(sample[self.keys[0]].dtype)
        for key in self.keys:
            arr = sample[key]
            if binary.shape[:-1] != arr.shape[:-1]:
                raise ConfigurationError(
                    f"mask shape {mask.shape} does not match {key!r} shape {arr.shape}"
                )
            sample[key] = arr * binary
        return sample


class RandomFlip(SampleTransform):
    """Flip the listed spatial axes with the given probability; the same
    decision is applied to every listed key so images and labels stay aligned."""

    def __init__(
        self,
        axes: tuple[int, ...] = (0,),
        probability: float = 0.5,
        keys: tuple[str, ...] | None = None,
    ):
        if not 0.0 <= probability <= 1.0:
            raise ConfigurationError("probability must lie in [0, 1]")
        self.axes = tuple(axes)
        self.probability = float(probability)
        self.keys = tuple(keys) if keys is not None else None
        self.required_keys = self.keys or ()

    def apply(self, sample, spec, seed):
        rng = np.random.default_rng([seed, spec.sample_index])
        flips = [axis for axis in self.axes if rng.random() < self.probability]
        if not flips:
            return sample
        keys = self.keys if self.keys is not None else [
            k for k, v in sample.items() if isinstance(v, np.ndarray) and v.ndim > max(self.axes)
        ]
        for key in keys:
            sample[key] = np.flip(sample[key], axis=flips).copy()
        return sample


class PermuteChannelsFirst(SampleTransform):
    """Move the trailing channel axis to the front (C, spatial...)."""

    def __init__(self, keys: tuple[str, ...] = ("images",)):
        self.keys = tuple(keys)
        self.required_keys = self.keys

    def apply(self, sample, spec, seed):
        for key in self.keys:
            sample[key] = np.ascontiguousarray(np.moveaxis(sample[key], -1, 0))
        return sample
