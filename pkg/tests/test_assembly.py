import numpy as np
import pytest

from miads.access import (
    DataExtractor,
    Datasource,
    EmptyIndexing,
    PadDataExtractor,
    PaddedPatchIndexing,
    PatchIndexing,
    SliceIndexing,
    plane_datasources,
)
from miads.assembly import SubjectAssembler, plane_assemble
from miads.dataset.memory import InMemoryHandle
from miads.errors import AssemblyError, NotReadyError


@pytest.fixture()
def volume():
    rng = np.random.default_rng(31)
    return rng.random((12, 16, 14, 2), dtype=np.float32)


@pytest.fixture()
def handle(volume):
    return InMemoryHandle({"S1": {"images": volume}})


def identity_round_trip(handle, strategy, extractor=None):
    ds = Datasource(handle, strategy, [extractor or DataExtractor("images")])
    assembler = SubjectAssembler(ds)
    for index in range(len(ds)):
        assembler.add(index, ds.get_sample(index)["images"])
    return assembler.assemble("S1"), ds, assembler


class TestIdentityRoundTrips:
    def test_slice(self, handle, volume):
        out, _, _ = identity_round_trip(handle, SliceIndexing(0))
        assert out.dtype == np.float32
        np.testing.assert_allclose(out, volume, atol=1e-6)

    def test_slab(self, handle, volume):
        out, _, _ = identity_round_trip(handle, PatchIndexing((5, 16, 14)))
        np.testing.assert_allclose(out, volume, atol=1e-6)

    def test_patch_equal(self, handle, volume):
        out, _, _ = identity_round_trip(handle, PatchIndexing((5, 5, 5)))
        np.testing.assert_allclose(out, volume, atol=1e-6)

    def test_patch_padded_core_sized_output(self, handle, volume):
        strategy = PaddedPatchIndexing((5, 8, 7), (2, 2, 2))
        ds = Datasource(handle, strategy, [PadDataExtractor("images")])
        assembler = SubjectAssembler(ds)
        for index in range(len(ds)):
            padded = ds.get_sample(index)["images"]
            core = padded[2:-2, 2:-2, 2:-2]  # the network's core-sized output
            assembler.add(index, core)
        np.testing.assert_allclose(assembler.assemble("S1"), volume, atol=1e-6)

    def test_patch_padded_network_emits_padded_size(self, handle, volume):
        strategy = PaddedPatchIndexing((5, 8, 7), (2, 2, 2))
        ds = Datasource(handle, strategy, [PadDataExtractor("images")])
        assembler = SubjectAssembler(ds)
        for index in range(len(ds)):
            assembler.add(index, ds.get_sample(index)["images"])  # assembler crops the pad
        np.testing.assert_allclose(assembler.assemble("S1"), volume, atol=1e-6)

    def test_empty_returns_prediction_itself(self, handle, volume):
        out, _, _ = identity_round_trip(handle, EmptyIndexing())
        np.testing.assert_allclose(out, volume, atol=1e-6)

    def test_overlapping_patches_average_to_identity(self, handle, volume):
        out, _, _ = identity_round_trip(handle, PatchIndexing((6, 8, 7), step=(3, 4, 7)))
        np.testing.assert_allclose(out, volume, atol=1e-6)


class TestAccumulation:
    def test_constant_predictions_yield_constant_volume(self, handle):
        ds = Datasource(handle, SliceIndexing(0), [DataExtractor("images")])
        assembler = SubjectAssembler(ds)
        for index in range(len(ds)):
            assembler.add(index, np.full((1, 16, 14, 2), 3.25, dtype=np.float32))
        np.testing.assert_array_equal(assembler.assemble("S1"), np.full((12, 16, 14, 2), 3.25))

    def test_duplicate_submission_still_averages(self, handle, volume):
        ds = Datasource(handle, SliceIndexing(0), [DataExtractor("images")])
        assembler = SubjectAssembler(ds)
        for index in range(len(ds)):
            assembler.add(index, ds.get_sample(index)["images"])
        assembler.add(3, ds.get_sample(3)["images"])  # weight 2 in that slice
        np.testing.assert_allclose(assembler.assemble("S1"), volume, atol=1e-6)
        assert assembler.received("S1") == len(ds)  # duplicates do not inflate progress

    def test_order_independence(self, handle, volume):
        ds = Datasource(handle, SliceIndexing(0), [DataExtractor("images")])
        order = np.random.default_rng(5).permutation(len(ds))
        assembler = SubjectAssembler(ds)
        for index in order:
            assembler.add(int(index), ds.get_sample(int(index))["images"])
        forward = SubjectAssembler(ds)
        for index in range(len(ds)):
            forward.add(index, ds.get_sample(index)["images"])
        np.testing.assert_array_equal(assembler.assemble("S1"), forward.assemble("S1"))

    def test_assemble_is_idempotent(self, handle):
        out, ds, assembler = identity_round_trip(handle, SliceIndexing(0))
        np.testing.assert_array_equal(out, assembler.assemble("S1"))

    def test_not_ready_lists_missing_samples(self, handle):
        ds = Datasource(handle, SliceIndexing(0), [DataExtractor("images")])
        assembler = SubjectAssembler(ds)
        assembler.add(0, ds.get_sample(0)["images"])
        with pytest.raises(NotReadyError, match=r"\[1, 2"):
            assembler.assemble("S1")
        assert assembler.missing("S1") == list(range(1, 12))
        assert not assembler.is_ready("S1")

    def test_shape_mismatch_cites_sample_index(self, handle):
        ds = Datasource(handle, SliceIndexing(0), [DataExtractor("images")])
        assembler = SubjectAssembler(ds)
        with pytest.raises(AssemblyError, match="sample 4"):
            assembler.add(4, np.zeros((2, 16, 14, 2), dtype=np.float32))

    def test_channelless_prediction_gets_one_channel(self, handle):
        ds = Datasource(handle, SliceIndexing(0), [DataExtractor("images")])
        assembler = SubjectAssembler(ds)
        for index in range(len(ds)):
            assembler.add(index, np.zeros((1, 16, 14), dtype=np.float32))
        assert assembler.assemble("S1").shape == (12, 16, 14, 1)


class TestPlaneAssembly:
    def test_identical_planes_equal_single_plane(self, handle, volume):
        planes = plane_datasources(handle, [DataExtractor("images")])
        assemblers = []
        for ds in planes:
            assembler = SubjectAssembler(ds)
            for index in range(len(ds)):
                assembler.add(index, ds.get_sample(index)["images"])
            assemblers.append(assembler)
        fused = plane_assemble(assemblers, "S1")
        np.testing.assert_allclose(fused, assemblers[0].assemble("S1"), atol=1e-6)
        np.testing.assert_allclose(fused, volume, atol=1e-6)

    def test_constant_planes_average(self, handle):
        planes = plane_datasources(handle, [DataExtractor("images")])
        assemblers = []
        for value, ds in zip((0.0, 1.0, 2.0), planes):
            assembler = SubjectAssembler(ds)
            for index in range(len(ds)):
                shape = ds.spec(index).region.size + (2,)
                assembler.add(index, np.full(shape, value, dtype=np.float32))
            assemblers.append(assembler)
        np.testing.assert_array_equal(
            plane_assemble(assemblers, "S1"), np.ones((12, 16, 14, 2), dtype=np.float32)
        )

    def test_incomplete_plane_is_named(self, handle):
        planes = plane_datasources(handle, [DataExtractor("images")])
        assemblers = [SubjectAssembler(ds) for ds in planes]
        for ds, assembler in zip(planes[:2], assemblers[:2]):
            for index in range(len(ds)):
                assembler.add(index, ds.get_sample(index)["images"])
        with pytest.raises(NotReadyError, match="plane 2"):
            plane_assemble(assemblers, "S1")


class TestCoverage:
    def test_slice_tiling_covers_each_voxel_once(self, handle):
        ds = Datasource(handle, SliceIndexing(0), [DataExtractor("images")])
        assembler = SubjectAssembler(ds)
        for index in range(len(ds)):
            assembler.add(index, np.ones((1, 16, 14, 1), dtype=np.float32))
        buf = assembler._buffers["S1"]
        np.testing.assert_array_equal(buf.weight, np.ones((12, 16, 14)))

    def test_patch_tiling_weight_one_inside(self, handle):
        ds = Datasource(handle, PatchIndexing((5, 5, 5)), [DataExtractor("images")])
        assembler = SubjectAssembler(ds)
        for index in range(len(ds)):
            assembler.add(index, np.ones((5, 5, 5, 1), dtype=np.float32))
        buf = assembler._buffers["S1"]
        np.testing.assert_array_equal(buf.weight, np.ones((12, 16, 14)))
