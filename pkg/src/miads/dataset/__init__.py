from .container import (
    ALIGNMENT,
    FORMAT_VERSION,
    MAGIC,
    CategoryDescriptor,
    ContainerSummary,
    DatasetMetadata,
    ProvenanceEntry,
)
from .creation import (
    CreationPlan,
    SubjectPlan,
    TransformSpec,
    create_dataset,
    create_metadata_dataset,
    load_plan_toml,
)
from .handle import DatasetHandle, inspect_dataset, open_dataset, read_region

__all__ = [
    "ALIGNMENT",
    "FORMAT_VERSION",
    "MAGIC",
    "CategoryDescriptor",
    "ContainerSummary",
    "DatasetMetadata",
    "ProvenanceEntry",
    "CreationPlan",
    "SubjectPlan",
    "TransformSpec",
    "create_dataset",
    "create_metadata_dataset",
    "load_plan_toml",
    "DatasetHandle",
    "inspect_dataset",
    "open_dataset",
    "read_region",
]
