"""Loading benchmark: compare per-sample load times of the container against
loading the same data from individual files (npy, MetaImage, compressed
MetaImage) under three access strategies (full volume, 3-D patch, 2-D slice).

File-based variants must load entire images even for a slice, which is the
cost the container's partial reads avoid. Fixtures are synthetic two-channel
random volumes, generated once per variant; timings use a monotonic clock,
include decoding, exclude fixture generation, and follow a warm-cache
protocol (untimed warm-up loads before measuring).
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .access import DataExtractor, Datasource, EmptyIndexing, PatchIndexing, SliceIndexing
from .access.datasource import filesystem_datasource
from .dataset import CreationPlan, SubjectPlan, create_dataset, open_dataset
from .errors import ConfigurationError
from .imageio import write_metaimage, write_npy

VARIANTS = ("container", "npy", "metaimage", "metaimage_compressed")
STRATEGIES = ("full", "patch", "slice")


@dataclass
class BenchConfig:
    workdir: str
    subjects: int = 25
    shape: tuple[int, int, int] = (181, 217, 181)
    patch_shape: tuple[int, int, int] = (84, 84, 84)
    variants: tuple[str, ...] = VARIANTS
    strategies: tuple[str, ...] = STRATEGIES
    runs: int = 5
    seed: int = 0
    max_samples: int = 0  # 0 = full pass over every sample, like the reference protocol
    warmup: int = 2


@dataclass
class BenchRow:
    variant: str
    strategy: str
    mean_ms: float
    std_ms: float
    samples: int


@dataclass
class _Fixtures:
    container_path: str
    plans: dict[str, CreationPlan] = field(default_factory=dict)


def _strategy(config: BenchConfig, name: str):
    if name == "full":
        return EmptyIndexing()
    if name == "patch":
        return PatchIndexing(tuple(config.patch_shape))
    if name == "slice":
        return SliceIndexing(0)
    raise ConfigurationError(f"unknown strategy {name!r}; valid: {', '.join(STRATEGIES)}")


def generate_fixtures(config: BenchConfig, progress=None) -> _Fixtures:
    """Write per-variant fixture files for every subject (once) and the
    container built from the npy files."""
    rng = np.random.default_rng(config.seed)
    root = config.workdir
    dirs = {v: os.path.join(root, v) for v in ("npy", "metaimage", "metaimage_compressed")}
    for d in dirs.values():
        os.makedirs(d, exist_ok=True)

    subjects: dict[str, dict[str, list[str]]] = {}
    from .core import ImageGeometry

    geometry = ImageGeometry.identity(3)
    for i in range(config.subjects):
        subject_id = f"Subject_{i + 1}"
        paths: dict[str, list[str]] = {v: [] for v in dirs}
        for channel in ("T1", "T2"):
            arr = rng.random(config.shape, dtype=np.float32)
            npy_path = os.path.join(dirs["npy"], f"{subject_id}_{channel}.npy")
            write_npy(arr, npy_path)
            paths["npy"].append(npy_path)
            mha_path = os.path.join(dirs["metaimage"], f"{subject_id}_{channel}.mha")
            write_metaimage(arr, geometry, mha_path, compressed=False)
            paths["metaimage"].append(mha_path)
            zmha_path = os.path.join(
                dirs["metaimage_compressed"], f"{subject_id}_{channel}.mha"
            )
            write_metaimage(arr, geometry, zmha_path, compressed=True)
            paths["metaimage_compressed"].append(zmha_path)
        subjects[subject_id] = paths
        if progress:
            progress(f"fixtures: {subject_id} written")

    plans = {
        variant: CreationPlan(
            subjects=[
                SubjectPlan(subject_id=s, sources={"images": paths[variant]})
                for s, paths in subjects.items()
            ],
            names={"images": ["T1", "T2"]},
        )
        for variant in dirs
    }
    container_path = os.path.join(root, "bench.miads")
    create_dataset(plans["npy"], container_path)
    if progress:
        progress("fixtures: container written")
    return _Fixtures(container_path=container_path, plans=plans)


def _datasource(fixtures: _Fixtures, variant: str, strategy) -> Datasource:
    extractors = [DataExtractor("images")]
    if variant == "container":
        return Datasource(open_dataset(fixtures.container_path), strategy, extractors)
    if variant in fixtures.plans:
        return filesystem_datasource(fixtures.plans[variant], strategy, extractors)
    raise ConfigurationError(f"unknown variant {variant!r}; valid: {', '.join(VARIANTS)}")


def _sample_indices(n: int, cap: int) -> list[int]:
    if cap <= 0 or cap >= n:
        return list(range(n))
    return sorted(set(np.linspace(0, n - 1, cap).astype(int).tolist()))


def run_benchmark(config: BenchConfig, progress=None) -> list[BenchRow]:
    for name in config.variants:
        if name not in VARIANTS:
            raise ConfigurationError(f"unknown variant {name!r}; valid: {', '.join(VARIANTS)}")
    strategies = [(name, _strategy(config, name)) for name in config.strategies]

    fixtures = generate_fixtures(config, progress)
    rows: list[BenchRow] = []
    for variant in config.variants:
        for strategy_name, strategy in strategies:
            ds = _datasource(fixtures, variant, strategy)
            indices = _sample_indices(len(ds), config.max_samples)
            for i in indices[: config.warmup]:
                ds.get_sample(i)
            times_ms: list[float] = []
            for _ in range(config.runs):
                for i in indices:
                    t0 = time.perf_counter()
                    ds.get_sample(i)
                    times_ms.append((time.perf_counter() - t0) * 1e3)
            ds.handle.close()
            rows.append(
                BenchRow(
                    variant=variant,
                    strategy=strategy_name,
                    mean_ms=float(np.mean(times_ms)),
                    std_ms=float(np.std(times_ms)),
                    samples=len(times_ms),
                )
            )
            if progress:
                progress(
                    f"{variant}/{strategy_name}: {rows[-1].mean_ms:.3f} ms "
                    f"± {rows[-1].std_ms:.3f} ms over {rows[-1].samples} loads"
                )
    return rows


def write_bench_csv(rows: list[BenchRow], path: str, delimiter: str = ";") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(delimiter.join(["VARIANT", "STRATEGY", "MEAN_MS", "STD_MS"]) + "\n")
        for row in rows:
            fh.write(
                delimiter.join(
                    [row.variant, row.strategy, repr(row.mean_ms), repr(row.std_ms)]
                )
                + "\n"
            )


def render_bench_chart(rows: list[BenchRow], width: int = 50) -> str:
    """Text bar chart of mean load times, grouped by strategy."""
    peak = max(row.mean_ms for row in rows)
    lines = []
    for strategy in dict.fromkeys(row.strategy for row in rows):
        lines.append(f"{strategy}:")
        for row in rows:
            if row.strategy != strategy:
                continue
            bar = "#" * max(1, int(round(row.mean_ms / peak * width)))
            lines.append(f"  {row.variant:<22} {bar} {row.mean_ms:.3f} ms")
    return "\n".join(lines) + "\n"
