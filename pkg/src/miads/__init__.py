"""miads: dataset containers, sample pipelines and evaluation for
deep-learning medical image analysis, independent of the training framework."""

__version__ = "0.1.0"

from .core import ImageGeometry, Region, SubjectRecord, extract_subtensor, linear_offset, voxel_volume

__all__ = [
    "__version__",
    "ImageGeometry",
    "Region",
    "SubjectRecord",
    "extract_subtensor",
    "linear_offset",
    "voxel_volume",
]
