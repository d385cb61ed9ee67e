"""Command-line interface: validate, run, report, synth.

Exit codes: 0 success, 1 cell failures during a run, 2 configuration or
validation errors. The LAYERPROBE_SEED environment variable overrides the
experiment config's protocol seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .manifest import ManifestError, load_manifest, validate_manifest
from .runner import (
    ConfigError,
    ExperimentConfig,
    best_layer_report,
    emit_results,
    read_results,
    run_grid,
)
from .synth import SynthSpec, generate

EXIT_OK = 0
EXIT_CELL_FAILURES = 1
EXIT_CONFIG_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layerprobe",
        description="Probe which layers, window sizes and pooling strategies "
        "expose binary labels from speech embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a manifest against an embedding store")
    p_validate.add_argument("--store", required=True, help="embedding store directory")
    p_validate.add_argument("--manifest", required=True, help="manifest JSON file")
    p_validate.add_argument("--layers", help="comma-separated layer indices (default: discover)")
    p_validate.add_argument("--min-window", type=float, help="warn for recordings shorter than this")

    p_run = sub.add_parser("run", help="run an experiment grid")
    p_run.add_argument("--config", required=True, help="experiment config JSON file")
    p_run.add_argument("--parallelism", type=int, help="override config parallelism")
    p_run.add_argument("--out", help="override output path")
    p_run.add_argument("--format", choices=("csv", "json"), help="override output format")

    p_report = sub.add_parser("report", help="summarize a result table")
    p_report.add_argument("--in", dest="infile", required=True, help="result file (.csv or .json)")
    p_report.add_argument("--best-layer", action="store_true", help="print best layer per label")

    p_synth = sub.add_parser("synth", help="generate a synthetic store + manifest")
    p_synth.add_argument("--spec", required=True, help="SynthSpec JSON file")
    p_synth.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_validate(args) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    layers = [int(v) for v in args.layers.split(",")] if args.layers else None
    report = validate_manifest(manifest, args.store, layers=layers, min_window_s=args.min_window)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_CONFIG_ERROR


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    if args.parallelism is not None:
        config.parallelism = args.parallelism
    if args.out is not None:
        config.output_path = args.out
    if args.format is not None:
        config.output_format = args.format
    env_seed = os.environ.get("LAYERPROBE_SEED")
    if env_seed is not None:
        config.protocol = dataclasses.replace(config.protocol, seed=int(env_seed))

    table = run_grid(config)
    n_failed = sum(1 for r in table.rows if r.failed)
    if config.output_path:
        out = emit_results(table, config.output_path, config.output_format)
        print(f"wrote {len(table.rows)} rows to {out} ({n_failed} failed cells)")
    else:
        print(json.dumps(table.to_dict(), indent=2))
    return EXIT_CELL_FAILURES if n_failed else EXIT_OK


def _cmd_report(args) -> int:
    table = read_results(args.infile)
    if args.best_layer:
        summary = best_layer_report(table)
        for label, best in summary["per_label"].items():
            print(f"{label}: best layer {best['layer']} (F1 {best['f1']:.4f})")
        print(f"macro mean of per-label bests: {summary['macro_mean_of_per_label_bests']:.4f}")
        if summary["best_layer_by_mean"] is not None:
            best = summary["best_layer_by_mean"]
            print(f"best layer by mean: layer {best['layer']} (mean F1 {best['mean_f1']:.4f})")
    else:
        ok = sum(1 for r in table.rows if not r.failed)
        print(f"{len(table.rows)} rows ({ok} ok, {len(table.rows) - ok} failed)")
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = SynthSpec.from_json(args.spec)
    store_root, manifest_path = generate(spec, Path(args.out))
    print(f"store:    {store_root}")
    print(f"manifest: {manifest_path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "synth":
            return _cmd_synth(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (ManifestError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
