import dataclasses

import numpy as np
import pytest

from miads.core import ImageGeometry
from miads.dataset import CreationPlan, SubjectPlan, create_dataset, create_metadata_dataset
from miads.imageio import write_metaimage

SPACING = (1.0, 1.0, 2.0)
SHAPE = (12, 16, 14)
N_LABELS = 5


def synth_subject(rng, shape=SHAPE):
    """Random two-channel intensities plus a blobby label/mask pair."""
    t1 = rng.random(shape, dtype=np.float32)
    t2 = rng.random(shape, dtype=np.float32)
    labels = rng.integers(0, N_LABELS + 1, size=shape).astype(np.uint8)
    mask = (rng.random(shape) > 0.2).astype(np.uint8)
    return t1, t2, labels, mask


def write_subject_files(directory, subject_id, rng, shape=SHAPE, spacing=SPACING):
    t1, t2, labels, mask = synth_subject(rng, shape)
    geometry = ImageGeometry(spacing=spacing)
    paths = {}
    for name, arr in (("T1", t1), ("T2", t2), ("GT", labels), ("MASK", mask)):
        path = str(directory / f"{subject_id}_{name}.mha")
        write_metaimage(arr, geometry, path)
        paths[name] = path
    arrays = {
        "images": np.stack([t1, t2], axis=-1),
        "labels": labels[..., np.newaxis],
        "mask": mask[..., np.newaxis],
    }
    return paths, arrays


@dataclasses.dataclass
class DatasetFixture:
    plan: CreationPlan
    container_path: str
    metadata_path: str
    arrays: dict  # subject_id -> category -> np.ndarray
    values: dict  # subject_id -> category -> inline payload
    spacing: tuple
    shape: tuple


@pytest.fixture(scope="session")
def dataset_fixture(tmp_path_factory) -> DatasetFixture:
    root = tmp_path_factory.mktemp("dataset_fixture")
    rng = np.random.default_rng(2024)
    subjects = []
    arrays = {}
    values = {}
    for i in range(4):
        subject_id = f"Subject_{i + 1}"
        paths, subject_arrays = write_subject_files(root, subject_id, rng)
        age, gpa = float(20 + i), float(2.0 + i / 4)
        gender = i % 2
        subjects.append(
            SubjectPlan(
                subject_id=subject_id,
                sources={
                    "images": [paths["T1"], paths["T2"]],
                    "labels": paths["GT"],
                    "mask": paths["MASK"],
                    "numerical": [age, gpa],
                    "gender": gender,
                },
            )
        )
        arrays[subject_id] = subject_arrays
        values[subject_id] = {"numerical": [age, gpa], "gender": gender}
    plan = CreationPlan(
        subjects=subjects,
        names={
            "images": ["T1", "T2"],
            "labels": ["GT"],
            "mask": ["MASK"],
            "numerical": ["AGE", "GPA"],
            "gender": ["GENDER"],
        },
        name="synthetic_head_example",
    )
    container_path = str(root / "full.miads")
    metadata_path = str(root / "meta.miads")
    create_dataset(plan, container_path)
    create_metadata_dataset(plan, metadata_path)
    return DatasetFixture(
        plan=plan,
        container_path=container_path,
        metadata_path=metadata_path,
        arrays=arrays,
        values=values,
        spacing=SPACING,
        shape=SHAPE,
    )
