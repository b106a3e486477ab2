"""Build the test fixture for the client test suite.

Usage: python3 fixture.py OUTPUT_DIR

Writes, under OUTPUT_DIR:
  ref/, pred/        four 5-label volumes each (MetaImage)
  labels.tsv         label map
  results.csv        CLI evaluation of the pair (DICE, HDRFDST95, VOLSMTY)
  fixture.miads      container with two-channel images for datasource tests
  expected.json      values computed by the primary library for comparison
"""

import hashlib
import json
import os
import sys

import numpy as np

from miads.access import DataExtractor, Datasource, SliceIndexing
from miads.cli import main as cli_main
from miads.core import ImageGeometry
from miads.dataset import CreationPlan, SubjectPlan, create_dataset, open_dataset
from miads.imageio import write_metaimage

SPACING = (1.0, 1.0, 2.0)
SHAPE = (10, 12, 9)
LABELS = {1: "white matter", 2: "gray matter", 3: "hippocampus", 4: "amygdala", 5: "thalamus"}
METRICS = "DICE,HDRFDST95,VOLSMTY"


def build(root: str) -> None:
    rng = np.random.default_rng(2025)
    geometry = ImageGeometry(spacing=SPACING)
    ref_dir = os.path.join(root, "ref")
    pred_dir = os.path.join(root, "pred")
    os.makedirs(ref_dir, exist_ok=True)
    os.makedirs(pred_dir, exist_ok=True)

    pairs = {}
    subjects = []
    assembled_sha = {}
    for i in range(4):
        subject_id = f"Subject_{i + 1}"
        ref = rng.integers(0, 6, size=SHAPE).astype(np.uint8)
        pred = ref.copy()
        flip = rng.random(SHAPE) < 0.2
        pred[flip] = rng.integers(0, 6, size=int(flip.sum())).astype(np.uint8)
        ref_path = os.path.join(ref_dir, f"{subject_id}.mha")
        pred_path = os.path.join(pred_dir, f"{subject_id}.mha")
        write_metaimage(ref, geometry, ref_path)
        write_metaimage(pred, geometry, pred_path)
        pairs[subject_id] = {"ref": ref_path, "pred": pred_path}

        t1 = rng.random(SHAPE, dtype=np.float32)
        t2 = rng.random(SHAPE, dtype=np.float32)
        t1_path = os.path.join(root, f"{subject_id}_T1.npy")
        t2_path = os.path.join(root, f"{subject_id}_T2.npy")
        from miads.imageio import write_npy

        write_npy(t1, t1_path)
        write_npy(t2, t2_path)
        subjects.append(SubjectPlan(subject_id, {"images": [t1_path, t2_path]}))
        images = np.stack([t1, t2], axis=-1)
        assembled_sha[subject_id] = hashlib.sha256(images.tobytes()).hexdigest()

    labels_path = os.path.join(root, "labels.tsv")
    with open(labels_path, "w", encoding="utf-8") as fh:
        for value, name in LABELS.items():
            fh.write(f"{value}\t{name}\n")

    results_path = os.path.join(root, "results.csv")
    code = cli_main(
        [
            "evaluate",
            "--ref", ref_dir,
            "--pred", pred_dir,
            "--labels", labels_path,
            "--metrics", METRICS,
            "--out", results_path,
            "--workers", "1",
        ]
    )
    if code != 0:
        raise SystemExit(f"CLI evaluation failed with exit code {code}")

    container_path = os.path.join(root, "fixture.miads")
    plan = CreationPlan(subjects=subjects, names={"images": ["T1", "T2"]}, name="client_fixture")
    create_dataset(plan, container_path)
    with open_dataset(container_path) as handle:
        ds = Datasource(handle, SliceIndexing(0), [DataExtractor("images")])
        expected = {
            "container_path": container_path,
            "results_csv": results_path,
            "pairs": pairs,
            "labels": {str(k): v for k, v in LABELS.items()},
            "metrics": METRICS.split(","),
            "spacing": list(SPACING),
            "datasource": {
                "length": len(ds),
                "subjects": ds.subjects,
                "slices_per_subject": SHAPE[0],
                "sample_images_shape": [1, SHAPE[1], SHAPE[2], 2],
                "assembled_shape": list(SHAPE) + [2],
                "assembled_sha256": assembled_sha,
            },
        }

    with open(os.path.join(root, "expected.json"), "w", encoding="utf-8") as fh:
        json.dump(expected, fh, indent=2)


if __name__ == "__main__":
    build(sys.argv[1])
