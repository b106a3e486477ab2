"""Command-line entry point: create, inspect, evaluate, stats, bench, serve.

Exit codes: 0 success, 1 runtime/data error, 2 usage or config error.
The CLI is a thin wrapper over the library; `serve` starts the HTTP service.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import glob
import os
import sys
import warnings

from .bench import (
    STRATEGIES,
    VARIANTS,
    BenchConfig,
    BenchRow,
    render_bench_chart,
    run_benchmark,
    write_bench_csv,
)
from .dataset import (
    create_dataset,
    create_metadata_dataset,
    inspect_dataset,
    load_plan_toml,
    open_dataset,
)
from .errors import EvaluationError, FormatError, MiadsError
from .evaluation import (
    MetricSpec,
    STATISTIC_FUNCTIONS,
    aggregate,
    evaluate_segmentation,
    parse_metric,
    read_results_csv,
    render_statistics_console,
    write_console,
    write_csv,
    write_statistics_csv,
)
from .imageio import read_image

_IMAGE_EXTENSIONS = (".mha", ".mhd", ".npy")


def _err(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def cmd_create(args) -> int:
    try:
        plan = load_plan_toml(args.config)
    except FormatError as exc:
        _err(str(exc))
        return 2
    plan.record_hashes = args.hash
    try:
        if args.metadata_only:
            summary = create_metadata_dataset(plan, args.out)
        else:
            summary = create_dataset(plan, args.out)
    except MiadsError as exc:
        _err(str(exc))
        return 1
    kind = "metadata container" if summary.metadata_only else "container"
    print(
        f"wrote {kind} {summary.path}: {summary.subjects} subjects, "
        f"categories [{', '.join(summary.categories)}], "
        f"{summary.payload_bytes} payload bytes, {summary.file_bytes} file bytes"
    )
    return 0


def _render_inspect(listing: dict) -> str:
    lines = [f"dataset: {listing['name'] or '(unnamed)'}"]
    lines.append(f"format_version: {listing['format_version']}")
    lines.append(f"metadata_only: {listing['metadata_only']}")
    lines.append(f"subjects: {len(listing['meta']['subjects'])}")
    lines.append("data/")
    for category, entries in listing["data"].items():
        shapes = {tuple(e["shape"]) for e in entries}
        dtypes = {e["dtype"] for e in entries}
        shape_text = (
            "x".join(str(d) for d in next(iter(shapes))) if len(shapes) == 1 else "varying"
        )
        lines.append(
            f"  {category}: {len(entries)} entries, dtype {'/'.join(sorted(dtypes))}, "
            f"shape {shape_text}"
        )
    meta = listing["meta"]
    lines.append("meta/")
    lines.append(f"  subjects: {', '.join(meta['subjects']) or '(none)'}")
    lines.append(f"  files: {len(meta['files'])} recorded source files")
    for entry in meta["files"]:
        sha = f" sha256={entry['sha256']}" if entry.get("sha256") else ""
        lines.append(
            f"    {entry['subject_id']}/{entry['category']}: {entry['source_path']}{sha}"
        )
    lines.append("  info:")
    for subject, categories in meta["info"].items():
        for category, geo in categories.items():
            lines.append(
                f"    {subject}/{category}: spacing {tuple(geo['spacing'])}, "
                f"origin {tuple(geo['origin'])}"
            )
    lines.append("  names:")
    for category, names in meta["names"].items():
        lines.append(f"    {category}: {', '.join(names)}")
    lines.append("  shape:")
    for subject, categories in meta["shape"].items():
        for category, shape in categories.items():
            lines.append(f"    {subject}/{category}: {'x'.join(str(d) for d in shape)}")
    return "\n".join(lines) + "\n"


def cmd_inspect(args) -> int:
    try:
        with open_dataset(args.dataset) as handle:
            listing = inspect_dataset(handle)
    except (MiadsError, OSError) as exc:
        _err(str(exc))
        return 1
    sys.stdout.write(_render_inspect(listing))
    return 0


def _collect_images(spec: str) -> dict[str, str]:
    """Map filename stem -> path for a directory or glob pattern."""
    if os.path.isdir(spec):
        paths = [
            os.path.join(spec, name)
            for name in sorted(os.listdir(spec))
            if name.endswith(_IMAGE_EXTENSIONS)
        ]
    else:
        paths = sorted(glob.glob(spec))
    out = {}
    for path in paths:
        stem = os.path.basename(path)
        for ext in _IMAGE_EXTENSIONS:
            if stem.endswith(ext):
                stem = stem[: -len(ext)]
                break
        out[stem] = path
    return out


def _load_labels(path: str) -> dict[int, str]:
    labels: dict[int, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}:{line_no}: expected 'int<TAB>name', got {line!r}")
            labels[int(parts[0])] = parts[1]
    if not labels:
        raise FormatError(f"{path}: no labels defined")
    return labels


def _evaluate_subject(task) -> tuple[str, list, list[str]]:
    subject_id, ref_path, pred_path, labels, specs = task
    messages: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        reference, ref_geometry = read_image(ref_path)
        prediction, pred_geometry = read_image(pred_path)
        results = evaluate_segmentation(
            reference,
            prediction,
            labels,
            specs,
            subject_id,
            geometry=ref_geometry,
            prediction_geometry=pred_geometry,
        )
        messages.extend(str(w.message) for w in caught)
    return subject_id, results, messages


def cmd_evaluate(args) -> int:
    try:
        specs = []
        for token in args.metrics.split(","):
            spec = parse_metric(token)
            if spec.abbreviation == "HDRFDST" and token.strip() == "HDRFDST":
                spec = MetricSpec("HDRFDST", percentile=args.hausdorff_percentile)
            if spec.abbreviation in ("SURFOVLP", "SURFDICE"):
                spec = MetricSpec(spec.abbreviation, tolerance_mm=args.tolerance_mm)
            if spec.abbreviation == "AREA" and args.slice_index is not None:
                spec = MetricSpec("AREA", slice_index=args.slice_index)
            specs.append(spec)
    except EvaluationError as exc:
        _err(str(exc))
        return 2
    try:
        labels = _load_labels(args.labels)
    except (FormatError, OSError, ValueError) as exc:
        _err(str(exc))
        return 2

    if args.pairs:
        tasks = []
        try:
            with open(args.pairs, "r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    subject_id, ref_path, pred_path = line.rstrip("\n").split("\t")
                    tasks.append((subject_id, ref_path, pred_path, labels, specs))
        except (OSError, ValueError) as exc:
            _err(f"bad pairs manifest: {exc}")
            return 2
    else:
        refs = _collect_images(args.ref)
        preds = _collect_images(args.pred)
        if not refs:
            _err(f"no reference images found under {args.ref!r}")
            return 1
        missing = sorted(set(refs) - set(preds))
        if missing:
            _err(f"no prediction for subjects: {', '.join(missing)}")
            return 1
        extra = sorted(set(preds) - set(refs))
        if extra:
            print(f"note: ignoring predictions without reference: {', '.join(extra)}",
                  file=sys.stderr)
        tasks = [(stem, refs[stem], preds[stem], labels, specs) for stem in refs]

    results = []
    try:
        if args.workers > 1 and len(tasks) > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
                outcomes = list(pool.map(_evaluate_subject, tasks))
        else:
            outcomes = [_evaluate_subject(task) for task in tasks]
    except MiadsError as exc:
        _err(str(exc))
        return 1
    for subject_id, subject_results, messages in outcomes:
        for message in messages:
            print(f"warning: {message}", file=sys.stderr)
        print(f"{subject_id}: evaluated", file=sys.stderr)
        results.extend(subject_results)

    if args.out:
        write_csv(results, args.out, delimiter=args.delimiter)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        write_console(results)
    return 0


def cmd_stats(args) -> int:
    names = [token.strip() for token in args.functions.split(",") if token.strip()]
    for name in names:
        if name not in STATISTIC_FUNCTIONS:
            _err(f"unknown statistic {name!r}; valid: {', '.join(STATISTIC_FUNCTIONS)}")
            return 2
    try:
        results = read_results_csv(args.results, delimiter=args.delimiter)
    except (MiadsError, OSError, ValueError) as exc:
        _err(str(exc))
        return 1
    rows = aggregate(results, functions=names)
    if args.out:
        write_statistics_csv(rows, args.out, delimiter=args.delimiter)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(render_statistics_console(rows))
    return 0


def cmd_bench(args) -> int:
    shape = tuple(int(v) for v in args.shape.split(","))
    patch = tuple(int(v) for v in args.patch_shape.split(","))
    if len(shape) != 3 or len(patch) != 3:
        _err("shape and patch shape must be Z,Y,X triples")
        return 2
    variants = tuple(v.strip() for v in args.variants.split(","))
    strategies = tuple(s.strip() for s in args.strategies.split(","))
    for v in variants:
        if v not in VARIANTS:
            _err(f"unknown variant {v!r}; valid: {', '.join(VARIANTS)}")
            return 2
    for s in strategies:
        if s not in STRATEGIES:
            _err(f"unknown strategy {s!r}; valid: {', '.join(STRATEGIES)}")
            return 2
    workdir = args.workdir or os.path.join(os.getcwd(), "bench_workdir")
    os.makedirs(workdir, exist_ok=True)
    config = BenchConfig(
        workdir=workdir,
        subjects=args.subjects,
        shape=shape,
        patch_shape=patch,
        variants=variants,
        strategies=strategies,
        runs=args.runs,
        seed=args.seed,
        max_samples=args.max_samples,
    )
    try:
        rows = run_benchmark(config, progress=lambda m: print(m, file=sys.stderr))
    except OSError as exc:
        _err(f"benchmark failed: {exc}")
        return 1
    if args.out:
        write_bench_csv(rows, args.out)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        write_bench_csv_stdout(rows)
    if args.chart:
        sys.stdout.write(render_bench_chart(rows))
    return 0


def write_bench_csv_stdout(rows: list[BenchRow]) -> None:
    print(";".join(["VARIANT", "STRATEGY", "MEAN_MS", "STD_MS"]))
    for row in rows:
        print(";".join([row.variant, row.strategy, repr(row.mean_ms), repr(row.std_ms)]))


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miads",
        description="Dataset containers, sample pipelines and evaluation for medical images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("create", help="create a dataset container from a TOML plan")
    p.add_argument("config", help="creation plan (TOML)")
    p.add_argument("--out", required=True, help="output container path")
    p.add_argument("--metadata-only", action="store_true",
                   help="store only identifiers, paths, shapes and geometry")
    p.add_argument("--hash", action="store_true", help="record SHA-256 of source files")
    p.set_defaults(func=cmd_create)

    p = sub.add_parser("inspect", help="list a container's structure")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("evaluate", help="evaluate predictions against references")
    p.add_argument("--ref", help="reference directory or glob")
    p.add_argument("--pred", help="prediction directory or glob")
    p.add_argument("--pairs", help="manifest with subject<TAB>ref<TAB>pred lines "
                                   "(overrides --ref/--pred stem matching)")
    p.add_argument("--labels", required=True, help="label map file: int<TAB>name lines")
    p.add_argument("--metrics", default="DICE,HDRFDST95,VOLSMTY",
                   help="comma-separated metric abbreviations")
    p.add_argument("--hausdorff-percentile", type=float, default=100.0)
    p.add_argument("--tolerance-mm", type=float, default=1.0)
    p.add_argument("--slice-index", type=int, default=None)
    p.add_argument("--out", help="CSV output path (console table when omitted)")
    p.add_argument("--delimiter", default=";")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="aggregate statistics over a results CSV")
    p.add_argument("results")
    p.add_argument("--functions", default="MEAN,STD",
                   help=f"comma-separated reducers from: {', '.join(STATISTIC_FUNCTIONS)}")
    p.add_argument("--out", help="statistics CSV path (console when omitted)")
    p.add_argument("--delimiter", default=";")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="benchmark per-sample loading times")
    p.add_argument("--subjects", type=int, default=25)
    p.add_argument("--shape", default="181,217,181")
    p.add_argument("--patch-shape", default="84,84,84")
    p.add_argument("--variants", default=",".join(VARIANTS))
    p.add_argument("--strategies", default=",".join(STRATEGIES))
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-samples", type=int, default=0,
                   help="cap timed samples per run (0 = full pass)")
    p.add_argument("--workdir", help="fixture directory (default: ./bench_workdir)")
    p.add_argument("--out", help="CSV output path (stdout when omitted)")
    p.add_argument("--chart", action="store_true", help="print a text bar chart")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8314)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "evaluate" and not args.pairs and (not args.ref or not args.pred):
        parser.error("evaluate needs --ref and --pred (or --pairs)")
    try:
        return args.func(args)
    except MiadsError as exc:
        _err(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
