import concurrent.futures
import hashlib
import os
import struct

import numpy as np
import pytest

from miads.core import Region, extract_subtensor
from miads.dataset import (
    CreationPlan,
    SubjectPlan,
    TransformSpec,
    create_dataset,
    create_metadata_dataset,
    inspect_dataset,
    load_plan_toml,
    open_dataset,
    read_region,
)
from miads.errors import (
    CorruptFileError,
    CreationError,
    DanglingSourceError,
    NotADatasetError,
    VersionError,
)
from miads.imageio import write_metaimage

from conftest import SHAPE, write_subject_files


class TestCreation:
    def test_channel_concatenation_shapes(self, dataset_fixture):
        with open_dataset(dataset_fixture.container_path) as handle:
            for subject in handle.subjects:
                assert handle.descriptor(subject, "images").shape == SHAPE + (2,)
                assert handle.descriptor(subject, "labels").shape == SHAPE + (1,)
                assert handle.descriptor(subject, "mask").shape == SHAPE + (1,)
                assert handle.descriptor(subject, "numerical").shape == (2,)
                assert handle.descriptor(subject, "gender").shape == (1,)

    def test_empty_plan(self, tmp_path):
        path = str(tmp_path / "empty.miads")
        summary = create_dataset(CreationPlan(), path)
        assert summary.subjects == 0
        with open_dataset(path) as handle:
            assert handle.subjects == []
            listing = inspect_dataset(handle)
        assert listing["meta"]["subjects"] == []

    def test_recorded_hashes_match_independent_sha256(self, tmp_path):
        rng = np.random.default_rng(1)
        paths, _ = write_subject_files(tmp_path, "S1", rng)
        plan = CreationPlan(
            subjects=[SubjectPlan("S1", {"images": [paths["T1"], paths["T2"]]})],
            record_hashes=True,
        )
        out = str(tmp_path / "hashed.miads")
        create_dataset(plan, out)
        with open_dataset(out) as handle:
            for entry in handle.metadata.provenance:
                digest = hashlib.sha256(open(entry.source_path, "rb").read()).hexdigest()
                assert entry.sha256 == digest

    def test_duplicate_subject_rejected(self, tmp_path):
        rng = np.random.default_rng(2)
        paths, _ = write_subject_files(tmp_path, "S1", rng)
        plan = CreationPlan(
            subjects=[
                SubjectPlan("S1", {"images": paths["T1"]}),
                SubjectPlan("S1", {"images": paths["T2"]}),
            ]
        )
        with pytest.raises(CreationError, match="duplicate"):
            create_dataset(plan, str(tmp_path / "dup.miads"))

    def test_shape_mismatch_names_subject_and_category(self, tmp_path):
        rng = np.random.default_rng(3)
        paths, _ = write_subject_files(tmp_path, "S1", rng)
        small = str(tmp_path / "small.mha")
        write_metaimage(np.zeros((3, 3, 3), dtype=np.uint8), _geometry3(), small)
        plan = CreationPlan(
            subjects=[SubjectPlan("S1", {"images": paths["T1"], "labels": small})]
        )
        with pytest.raises(CreationError, match="S1"):
            create_dataset(plan, str(tmp_path / "mismatch.miads"))

    def test_mismatched_categories_rejected(self, tmp_path):
        rng = np.random.default_rng(4)
        paths1, _ = write_subject_files(tmp_path, "S1", rng)
        paths2, _ = write_subject_files(tmp_path, "S2", rng)
        plan = CreationPlan(
            subjects=[
                SubjectPlan("S1", {"images": paths1["T1"]}),
                SubjectPlan("S2", {"images": paths2["T1"], "labels": paths2["GT"]}),
            ]
        )
        with pytest.raises(CreationError, match="categories"):
            create_dataset(plan, str(tmp_path / "cats.miads"))

    def test_missing_source_is_creation_error(self, tmp_path):
        plan = CreationPlan(subjects=[SubjectPlan("S1", {"images": "/nonexistent.mha"})])
        out = str(tmp_path / "missing.miads")
        with pytest.raises(CreationError, match="not found"):
            create_dataset(plan, out)
        assert not os.path.exists(out)

    def test_byte_deterministic(self, dataset_fixture, tmp_path):
        a = str(tmp_path / "a.miads")
        b = str(tmp_path / "b.miads")
        create_dataset(dataset_fixture.plan, a)
        create_dataset(dataset_fixture.plan, b)
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_write_time_transform_applied(self, tmp_path):
        rng = np.random.default_rng(5)
        paths, _ = write_subject_files(tmp_path, "S1", rng)
        plan = CreationPlan(
            subjects=[SubjectPlan("S1", {"images": [paths["T1"], paths["T2"]]})],
            transforms=[TransformSpec("rescale_intensity", ("images",), {"out_min": 0.0, "out_max": 1.0})],
        )
        full = str(tmp_path / "full.miads")
        meta = str(tmp_path / "meta.miads")
        create_dataset(plan, full)
        create_metadata_dataset(plan, meta)
        with open_dataset(full) as fh, open_dataset(meta) as mh:
            a = fh.read("S1", "images")
            b = mh.read("S1", "images")
        assert a.min() == 0.0 and a.max() == 1.0
        np.testing.assert_array_equal(a, b)


def _geometry3():
    from miads.core import ImageGeometry

    return ImageGeometry(spacing=(1.0, 1.0, 1.0))


class TestMetadataDataset:
    def test_reads_match_full_container(self, dataset_fixture):
        rng = np.random.default_rng(7)
        with open_dataset(dataset_fixture.container_path) as full, open_dataset(
            dataset_fixture.metadata_path
        ) as meta:
            assert meta.metadata.metadata_only
            for subject in full.subjects:
                for category in ("images", "labels", "mask", "numerical", "gender"):
                    np.testing.assert_array_equal(
                        full.read(subject, category), meta.read(subject, category)
                    )
            for _ in range(25):
                subject = full.subjects[rng.integers(0, 4)]
                start = [rng.integers(0, e - 2) for e in SHAPE]
                size = [int(rng.integers(1, e - s + 1)) for s, e in zip(start, SHAPE)]
                region = Region(tuple(int(s) for s in start), tuple(size))
                np.testing.assert_array_equal(
                    full.read(subject, "images", region), meta.read(subject, "images", region)
                )

    def test_metadata_file_is_small_while_payload_is_large(self, tmp_path):
        # 25 subjects, two declared 181x217x181 float images each: the payload
        # arithmetic crosses 1 GB while the metadata container stays tiny.
        header_dir = tmp_path / "headers"
        header_dir.mkdir()
        subjects = []
        for i in range(25):
            paths = []
            for channel in ("T1", "T2"):
                path = header_dir / f"s{i}_{channel}.mhd"
                path.write_text(
                    "ObjectType = Image\nNDims = 3\nDimSize = 181 217 181\n"
                    "ElementType = MET_FLOAT\nElementDataFile = s_missing.raw\n"
                )
                paths.append(str(path))
            subjects.append(SubjectPlan(f"S{i}", {"images": paths}))
        plan = CreationPlan(subjects=subjects)
        out = str(tmp_path / "meta.miads")
        create_metadata_dataset(plan, out)
        payload_bytes = 25 * 2 * 181 * 217 * 181 * 4
        assert payload_bytes > 1_000_000_000
        assert os.path.getsize(out) < 1_000_000
        with open_dataset(out) as handle:
            assert handle.descriptor("S0", "images").shape == (181, 217, 181, 2)

    def test_dangling_source_names_path(self, tmp_path):
        rng = np.random.default_rng(8)
        paths, _ = write_subject_files(tmp_path, "S1", rng)
        plan = CreationPlan(subjects=[SubjectPlan("S1", {"images": paths["T1"]})])
        out = str(tmp_path / "meta.miads")
        create_metadata_dataset(plan, out)
        os.unlink(paths["T1"])
        with open_dataset(out) as handle:
            with pytest.raises(DanglingSourceError, match="T1"):
                handle.read("S1", "images")


class TestOpenAndInspect:
    def test_inspect_mirrors_tree(self, dataset_fixture):
        with open_dataset(dataset_fixture.container_path) as handle:
            listing = inspect_dataset(handle)
        assert set(listing["data"]) == {"images", "labels", "mask", "numerical", "gender"}
        assert set(listing["meta"]) == {"subjects", "files", "info", "names", "shape"}
        assert listing["meta"]["subjects"] == [f"Subject_{i}" for i in (1, 2, 3, 4)]
        assert listing["meta"]["names"]["images"] == ["T1", "T2"]
        assert len(listing["meta"]["files"]) == 4 * 4  # four recorded files per subject

    def test_inspect_stable_across_opens(self, dataset_fixture):
        with open_dataset(dataset_fixture.container_path) as a:
            first = inspect_dataset(a)
        with open_dataset(dataset_fixture.container_path) as b:
            second = inspect_dataset(b)
        assert first == second

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "not_a_dataset"
        path.write_bytes(b"JUNKJUNK" + b"\x00" * 16)
        with pytest.raises(NotADatasetError):
            open_dataset(str(path))

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "future"
        path.write_bytes(b"MIADS\x00\x09\x00" + struct.pack("<QQ", 24, 2) + b"{}")
        with pytest.raises(VersionError):
            open_dataset(str(path))

    def test_truncated_container(self, dataset_fixture, tmp_path):
        data = open(dataset_fixture.container_path, "rb").read()
        path = tmp_path / "truncated.miads"
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CorruptFileError):
            open_dataset(str(path))


class TestReadRegion:
    def test_full_read_matches_sources(self, dataset_fixture):
        with open_dataset(dataset_fixture.container_path) as handle:
            for subject, arrays in dataset_fixture.arrays.items():
                for category, expected in arrays.items():
                    np.testing.assert_array_equal(handle.read(subject, category), expected)
                np.testing.assert_array_equal(
                    handle.read(subject, "numerical"),
                    np.asarray(dataset_fixture.values[subject]["numerical"]),
                )

    def test_slice_equals_full_indexing(self, dataset_fixture):
        with open_dataset(dataset_fixture.container_path) as handle:
            full = handle.read("Subject_1", "images")
            region = Region((5, 0, 0), (1, SHAPE[1], SHAPE[2]))
            sliced = handle.read("Subject_1", "images", region)
        np.testing.assert_array_equal(sliced, full[5:6])

    def test_patch_equals_extract_oracle(self, dataset_fixture):
        with open_dataset(dataset_fixture.container_path) as handle:
            full = handle.read("Subject_2", "images")
            region = Region((2, 3, 4), (5, 6, 7))
            patch = handle.read("Subject_2", "images", region)
        np.testing.assert_array_equal(patch, extract_subtensor(full, region.start, region.size))

    def test_random_regions_bit_exact(self, dataset_fixture):
        rng = np.random.default_rng(9)
        with open_dataset(dataset_fixture.container_path) as handle:
            for _ in range(200):
                subject = handle.subjects[int(rng.integers(0, 4))]
                category = ("images", "labels", "mask")[int(rng.integers(0, 3))]
                start = tuple(int(rng.integers(0, e)) for e in SHAPE)
                size = tuple(
                    int(rng.integers(1, e - s + 1)) for s, e in zip(start, SHAPE)
                )
                got = handle.read(subject, category, Region(start, size))
                expected = dataset_fixture.arrays[subject][category][
                    tuple(slice(s, s + n) for s, n in zip(start, size))
                ]
                np.testing.assert_array_equal(got, expected)

    def test_unknown_subject_and_category(self, dataset_fixture):
        with open_dataset(dataset_fixture.container_path) as handle:
            with pytest.raises(KeyError):
                handle.read("Nobody", "images")
            with pytest.raises(KeyError):
                handle.read("Subject_1", "unknown")

    def test_out_of_bounds_region(self, dataset_fixture):
        with open_dataset(dataset_fixture.container_path) as handle:
            with pytest.raises(IndexError):
                handle.read("Subject_1", "images", Region((0, 0, 10), (1, 1, 10)))
            with pytest.raises(IndexError):
                handle.read("Subject_1", "images", Region((0, 0), (1, 1)))

    def test_region_on_non_image_rejected(self, dataset_fixture):
        with open_dataset(dataset_fixture.container_path) as handle:
            with pytest.raises(ValueError):
                handle.read("Subject_1", "numerical", Region((0,), (1,)))

    def test_module_level_read_region(self, dataset_fixture):
        with open_dataset(dataset_fixture.container_path) as handle:
            np.testing.assert_array_equal(
                read_region(handle, "Subject_1", "labels"),
                dataset_fixture.arrays["Subject_1"]["labels"],
            )

    def test_read_call_contracts(self, dataset_fixture):
        """An axis-0 slice is one contiguous read; an n-D patch needs at most
        size[0]*size[1] strided reads."""
        from unittest import mock

        import miads.dataset.handle as handle_module

        real_pread = os.pread
        calls = []

        def counting(fd, n, offset):
            calls.append(n)
            return real_pread(fd, n, offset)

        with open_dataset(dataset_fixture.container_path) as handle:
            with mock.patch.object(handle_module.os, "pread", counting):
                calls.clear()
                handle.read("Subject_1", "images", Region((5, 0, 0), (1,) + SHAPE[1:]))
                assert len(calls) == 1
                assert calls[0] == SHAPE[1] * SHAPE[2] * 2 * 4
                calls.clear()
                handle.read("Subject_1", "images", Region((1, 2, 3), (4, 5, 6)))
                assert len(calls) <= 4 * 5
                calls.clear()
                handle.read("Subject_1", "images")
                assert len(calls) == 1

    def test_concurrent_reads(self, dataset_fixture):
        rng = np.random.default_rng(10)
        jobs = []
        for _ in range(64):
            subject = f"Subject_{int(rng.integers(1, 5))}"
            start = tuple(int(rng.integers(0, e - 1)) for e in SHAPE)
            size = tuple(int(rng.integers(1, e - s + 1)) for s, e in zip(start, SHAPE))
            jobs.append((subject, Region(start, size)))
        with open_dataset(dataset_fixture.container_path) as handle:
            def work(job):
                subject, region = job
                return subject, region, handle.read(subject, "images", region)

            with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
                for subject, region, got in pool.map(work, jobs):
                    expected = dataset_fixture.arrays[subject]["images"][
                        tuple(slice(s, s + n) for s, n in zip(region.start, region.size))
                    ]
                    np.testing.assert_array_equal(got, expected)


class TestPlanToml:
    def test_round_trip_via_cli_schema(self, tmp_path):
        rng = np.random.default_rng(11)
        paths, _ = write_subject_files(tmp_path, "S1", rng)
        config = tmp_path / "plan.toml"
        config.write_text(
            f"""
[dataset]
name = "demo"

[names]
images = ["T1", "T2"]
labels = ["GT"]

[[transform]]
kind = "rescale_intensity"
categories = ["images"]
out_min = 0.0
out_max = 1.0

[[subject]]
id = "S1"
[subject.files]
images = ["{os.path.basename(paths['T1'])}", "{os.path.basename(paths['T2'])}"]
labels = "{os.path.basename(paths['GT'])}"
[subject.values]
numerical = [34.0, 3.5]
gender = 1
"""
        )
        plan = load_plan_toml(str(config))
        assert plan.name == "demo"
        assert plan.subjects[0].subject_id == "S1"
        assert plan.subjects[0].sources["images"][0] == paths["T1"]  # resolves relative paths
        assert plan.transforms[0].kind == "rescale_intensity"
        out = str(tmp_path / "from_toml.miads")
        create_dataset(plan, out)
        with open_dataset(out) as handle:
            assert handle.subjects == ["S1"]
            assert handle.read("S1", "gender")[0] == 1
