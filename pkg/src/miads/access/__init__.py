from .datasource import Datasource, filesystem_datasource, plane_datasources
from .extractors import (
    DataExtractor,
    Extractor,
    GeometryExtractor,
    NamesExtractor,
    PadDataExtractor,
    SelectiveDataExtractor,
    ShapeExtractor,
    SubjectIdExtractor,
)
from .indexing import (
    EmptyIndexing,
    IndexingStrategy,
    PaddedPatchIndexing,
    PatchIndexing,
    SampleSpec,
    SliceIndexing,
    build_index,
)
from .transforms import (
    ApplyMask,
    PermuteChannelsFirst,
    RandomFlip,
    RescaleIntensity,
    SampleTransform,
    ZNormalize,
)

__all__ = [
    "Datasource",
    "filesystem_datasource",
    "plane_datasources",
    "Extractor",
    "DataExtractor",
    "PadDataExtractor",
    "SelectiveDataExtractor",
    "SubjectIdExtractor",
    "GeometryExtractor",
    "ShapeExtractor",
    "NamesExtractor",
    "IndexingStrategy",
    "EmptyIndexing",
    "SliceIndexing",
    "PatchIndexing",
    "PaddedPatchIndexing",
    "SampleSpec",
    "build_index",
    "SampleTransform",
    "ZNormalize",
    "RescaleIntensity",
    "ApplyMask",
    "RandomFlip",
    "PermuteChannelsFirst",
]
