"""Acceptance suite: one test per acceptance criterion, each printing a
PASS line with its headline numbers (run with -s or check captured output).

The benchmark criterion generates ~5.7 GB of fixtures under the pytest tmp
directory and takes several minutes; everything else is fast.
"""

import math
import shutil
import time

import numpy as np
import pytest

from miads.access import (
    DataExtractor,
    Datasource,
    PadDataExtractor,
    PaddedPatchIndexing,
    PatchIndexing,
    SliceIndexing,
    plane_datasources,
)
from miads.assembly import SubjectAssembler, plane_assemble
from miads.bench import BenchConfig, run_benchmark
from miads.core import ImageGeometry, Region
from miads.dataset import create_dataset, open_dataset
from miads.dataset.memory import InMemoryHandle
from miads.errors import MetricWarning
from miads.evaluation import evaluate_segmentation, write_csv
from miads.metrics.confusion import (
    agreement_metrics,
    confusion,
    information_metrics,
    pair_counting,
    ratio_metrics,
)
from miads.metrics.continuous import psnr, ssim
from miads.metrics.distance import average_distance, hausdorff, mahalanobis, surface_metrics

import oracles

VOLUME_SHAPE = (181, 217, 181)
SPACINGS = [(1.0, 1.0, 1.0), (0.5, 2.0, 1.25), (2.0, 0.25, 1.0)]


def report(name: str, detail: str = ""):
    suffix = f" ({detail})" if detail else ""
    print(f"[ACCEPTANCE] {name}: PASS{suffix}")


class TestRoundTripMasterProperty:
    def test_round_trip_master_property(self):
        started = time.perf_counter()
        rng = np.random.default_rng(1234)
        volume = rng.random(VOLUME_SHAPE + (2,), dtype=np.float32)
        handle = InMemoryHandle({"S": {"images": volume}})

        worst = {}

        def run_case(name, strategy, extractor=None, crop_pad=False):
            ds = Datasource(handle, strategy, [extractor or DataExtractor("images")])
            assembler = SubjectAssembler(ds)
            for index in range(len(ds)):
                prediction = ds.get_sample(index)["images"]  # identity network
                assembler.add(index, prediction)
            out = assembler.assemble("S")
            worst[name] = float(np.abs(out - volume).max())

        run_case("slice", SliceIndexing(0))
        run_case("slab_k8", PatchIndexing((8,) + VOLUME_SHAPE[1:]))
        run_case("patch_equal_84", PatchIndexing((84, 84, 84)))
        run_case(
            "patch_padded_84_8",
            PaddedPatchIndexing((84, 84, 84), (8, 8, 8)),
            extractor=PadDataExtractor("images"),
        )

        planes = plane_datasources(handle, [DataExtractor("images")])
        assemblers = []
        for ds in planes:
            assembler = SubjectAssembler(ds)
            for index in range(len(ds)):
                assembler.add(index, ds.get_sample(index)["images"])
            assemblers.append(assembler)
        fused = plane_assemble(assemblers, "S")
        worst["planes_2_5d"] = float(np.abs(fused - volume).max())

        elapsed = time.perf_counter() - started
        for name, error in worst.items():
            assert error <= 1e-6, f"{name}: max abs error {error}"
        assert elapsed < 120.0, f"round-trip suite took {elapsed:.1f}s"
        report(
            "round-trip master property",
            f"max abs error {max(worst.values()):.2e} over {list(worst)} in {elapsed:.1f}s",
        )


class TestMetricOracleSuite:
    def test_metric_oracle_suite(self):
        started = time.perf_counter()
        checked = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            density = rng.uniform(0.2, 0.8)
            ref = (rng.random((5, 5, 5)) < density).astype(np.uint8)
            pred = (rng.random((5, 5, 5)) < density).astype(np.uint8)
            if not ref.any() or not pred.any() or ref.all() or pred.all():
                continue
            spacing = SPACINGS[seed % len(SPACINGS)]
            cm = confusion(ref, pred)

            # hand formulas from independently counted cells
            tp, fp, tn, fn = oracles.brute_confusion(ref, pred)
            assert (cm.tp, cm.fp, cm.tn, cm.fn) == (tp, fp, tn, fn)
            values = ratio_metrics(cm)
            n = tp + fp + tn + fn
            hand = {
                "DICE": 2 * tp / (2 * tp + fp + fn),
                "JACRD": tp / (tp + fp + fn),
                "SNSVTY": tp / (tp + fn),
                "SPCFTY": tn / (tn + fp),
                "FALLOUT": fp / (fp + tn),
                "FNR": fn / (fn + tp),
                "ACURCY": (tp + tn) / n,
                "PRCISON": tp / (tp + fp),
                "VOLSMTY": 1 - abs(fn - fp) / (2 * tp + fp + fn),
            }
            for key, expected in hand.items():
                assert abs(values[key] - expected) <= 1e-10, key

            rndind, adjrind = pair_counting(cm)
            assert abs(rndind - oracles.brute_rand_index(ref, pred)) <= 1e-10
            assert abs(adjrind - oracles.brute_adjusted_rand(ref, pred)) <= 1e-10

            mi, vi = information_metrics(cm)
            emi, evi = oracles.brute_information(ref, pred)
            assert abs(mi - emi) <= 1e-10 and abs(vi - evi) <= 1e-10

            agreement = agreement_metrics(cm)
            assert abs(agreement["GCOERR"] - oracles.brute_gce(ref, pred)) <= 1e-10
            assert abs(agreement["ICCORR"] - oracles.brute_icc(ref, pred)) <= 1e-10
            po = (tp + tn) / n
            pe = ((tp + fn) * (tp + fp) + (fp + tn) * (fn + tn)) / n / n
            assert abs(agreement["KAPPA"] - (po - pe) / (1 - pe)) <= 1e-10
            assert abs(agreement["AUC"] - (tp / (tp + fn) + tn / (tn + fp)) / 2) <= 1e-10
            assert abs(agreement["PROBDST"] - (fn + fp) / (2 * tp)) <= 1e-10

            # distance metrics against all-pairs brute force
            for percentile in (50.0, 95.0, 100.0):
                assert (
                    abs(
                        hausdorff(ref, pred, spacing, percentile)
                        - oracles.brute_hausdorff(ref, pred, spacing, percentile)
                    )
                    <= 1e-9
                )
            assert (
                abs(
                    average_distance(ref, pred, spacing)
                    - oracles.brute_average_distance(ref, pred, spacing)
                )
                <= 1e-9
            )
            tolerance = float(rng.uniform(0.0, 3.0))
            ours = surface_metrics(ref, pred, spacing, tolerance)
            theirs = oracles.brute_surface_metrics(ref, pred, spacing, tolerance)
            for key in theirs:
                assert abs(ours[key] - theirs[key]) <= 1e-9, key
            assert (
                abs(mahalanobis(ref, pred, spacing) - oracles.brute_mahalanobis(ref, pred, spacing))
                <= 1e-9
            )
            checked += 1

        elapsed = time.perf_counter() - started
        assert checked >= 95  # degenerate draws are skipped, near-none expected
        assert elapsed < 60.0, f"oracle suite took {elapsed:.1f}s"
        report("metric oracle suite", f"{checked} mask pairs in {elapsed:.1f}s")


class TestFixtureTGoldenValues:
    def test_fixture_t_golden_values(self):
        ref = np.zeros((4, 4), dtype=np.uint8)
        ref[1:3, 1:3] = 1
        pred = np.zeros((4, 4), dtype=np.uint8)
        pred[1, 1:3] = 1
        cm = confusion(ref, pred)
        ratios = ratio_metrics(cm)
        agreement = agreement_metrics(cm)
        rndind, _ = pair_counting(cm)
        mi, _ = information_metrics(cm)
        golden = {
            "DICE": (ratios["DICE"], 0.6667, 1e-3),
            "JACRD": (ratios["JACRD"], 0.5, 1e-12),
            "VOLSMTY": (ratios["VOLSMTY"], 0.6667, 1e-3),
            "ACURCY": (ratios["ACURCY"], 0.875, 1e-12),
            "KAPPA": (agreement["KAPPA"], 0.6, 1e-12),
            "AUC": (agreement["AUC"], 0.75, 1e-12),
            "PROBDST": (agreement["PROBDST"], 0.5, 1e-12),
            "GCOERR": (agreement["GCOERR"], 0.1875, 1e-12),
            "RNDIND": (rndind, 0.7667, 1e-3),
            "MUTINF": (mi, 0.294, 1e-3),
        }
        for name, (value, expected, tolerance) in golden.items():
            assert abs(value - expected) <= tolerance, f"{name}: {value} != {expected}"
        report("fixture-T golden values", ", ".join(f"{k}={v[0]:.4f}" for k, v in golden.items()))


class TestSsimPsnr:
    def test_ssim_psnr(self):
        rng = np.random.default_rng(77)
        for shape in ((16, 16), (9, 9, 9)):
            x = rng.random(shape)
            assert ssim(x, x) == 1.0

        worst = 0.0
        for _ in range(20):
            x = rng.random((16, 16))
            y = rng.random((16, 16))
            ours = ssim(x, y, data_range=1.0)
            reference = oracles.ssim_reference(x, y, data_range=1.0)
            worst = max(worst, abs(ours - reference))
        assert worst <= 1e-7

        value = psnr(np.zeros(1000), np.full(1000, 0.1), data_range=1.0)
        assert abs(value - 20.0) <= 1e-9
        report("SSIM/PSNR", f"ssim(x,x)=1 exact, max |Δssim|={worst:.2e}, psnr={value:.12f} dB")


class TestDatasetPartialReads:
    def test_dataset_partial_reads(self, dataset_fixture, tmp_path):
        rng = np.random.default_rng(4242)
        shape = dataset_fixture.shape
        reads = 0
        with open_dataset(dataset_fixture.container_path) as handle:
            for _ in range(1000):
                subject = handle.subjects[int(rng.integers(0, 4))]
                category = ("images", "labels", "mask")[int(rng.integers(0, 3))]
                start = tuple(int(rng.integers(0, e)) for e in shape)
                size = tuple(int(rng.integers(1, e - s + 1)) for s, e in zip(start, shape))
                got = handle.read(subject, category, Region(start, size))
                expected = dataset_fixture.arrays[subject][category][
                    tuple(slice(s, s + n) for s, n in zip(start, size))
                ]
                assert got.tobytes() == expected.tobytes()
                reads += 1

        a = str(tmp_path / "det_a.miads")
        b = str(tmp_path / "det_b.miads")
        create_dataset(dataset_fixture.plan, a)
        create_dataset(dataset_fixture.plan, b)
        bytes_a = open(a, "rb").read()
        assert bytes_a == open(b, "rb").read()
        report(
            "dataset partial reads",
            f"{reads} random region reads bit-exact, creation deterministic "
            f"({len(bytes_a)} bytes)",
        )


class TestCsvContract:
    def test_csv_contract(self, tmp_path):
        rng = np.random.default_rng(99)
        labels = {
            1: "white matter",
            2: "gray matter",
            3: "hippocampus",
            4: "amygdala",
            5: "thalamus",
        }
        geometry = ImageGeometry(spacing=(1.0, 1.0, 2.0))
        subjects = []
        for i in range(4):
            ref = rng.integers(0, 6, size=(10, 11, 9)).astype(np.uint8)
            pred = ref.copy()
            flip = rng.random(ref.shape) < 0.25
            pred[flip] = rng.integers(0, 6, size=int(flip.sum())).astype(np.uint8)
            subjects.append((f"Subject_{i + 1}", ref, pred))

        def evaluate_all(path):
            results = []
            for subject_id, ref, pred in subjects:
                results += evaluate_segmentation(
                    ref, pred, labels, ["DICE", "HDRFDST95", "VOLSMTY"], subject_id, geometry
                )
            write_csv(results, path)
            return open(path, "rb").read()

        first = evaluate_all(str(tmp_path / "run1.csv"))
        second = evaluate_all(str(tmp_path / "run2.csv"))
        assert first == second
        lines = first.decode("utf-8").splitlines()
        assert lines[0] == "SUBJECT;LABEL;DICE;HDRFDST95;VOLSMTY"
        assert len(lines) == 1 + 20
        assert first.endswith(b"\n")
        report("CSV contract", "20 rows, expected header, byte-identical across runs")


class TestBenchmarkOrdering:
    def test_benchmark_ordering(self, tmp_path_factory):
        started = time.perf_counter()
        workdir = str(tmp_path_factory.mktemp("bench_acceptance"))
        config = BenchConfig(
            workdir=workdir,
            subjects=25,
            shape=(181, 217, 181),
            patch_shape=(84, 84, 84),
            runs=5,
            seed=7,
            max_samples=30,  # deterministic evenly spaced subsample of each pass
        )
        try:
            rows = run_benchmark(config)
        finally:
            shutil.rmtree(workdir, ignore_errors=True)
        elapsed = time.perf_counter() - started
        means = {(r.variant, r.strategy): r.mean_ms for r in rows}

        slice_order = [
            means[("container", "slice")],
            means[("npy", "slice")],
            means[("metaimage", "slice")],
            means[("metaimage_compressed", "slice")],
        ]
        assert slice_order == sorted(slice_order), f"slice ordering violated: {slice_order}"
        assert all(a < b for a, b in zip(slice_order, slice_order[1:])), slice_order

        for strategy in ("slice", "patch"):
            container = means[("container", strategy)]
            compressed = means[("metaimage_compressed", strategy)]
            assert compressed >= 5.0 * container, (
                f"{strategy}: container {container:.3f} ms vs compressed {compressed:.3f} ms"
            )
        assert elapsed < 900.0, f"benchmark took {elapsed:.1f}s"
        report(
            "benchmark ordering",
            "slice ms: "
            + ", ".join(f"{v:.2f}" for v in slice_order)
            + f"; container/compressed patch ratio "
            f"{means[('metaimage_compressed', 'patch')] / means[('container', 'patch')]:.1f}x; "
            f"{elapsed:.0f}s total",
        )
