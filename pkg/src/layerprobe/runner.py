"""Experiment orchestration: grid expansion, scheduling, result tables.

A grid cell is one (label, layer, window size, pooling) combination under a
fixed protocol. Cells sharing (label, layer, window) form a group that
reuses its per-fold probe fits across pooling strategies, since pooling
never affects training. Groups are independent, so they can run in a
process pool; rows are assembled and sorted deterministically afterwards,
making parallel and sequential runs byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__ as ENGINE_VERSION
from .embedding_io import EmbeddingStore
from .evaluation import (
    MIDDLE_WINDOW_ONLY,
    EvalProtocol,
    ResultRow,
    evaluate_cell_group,
    evaluate_config,
)
from .manifest import Manifest, load_manifest, validate_manifest
from .pooling import PoolingStrategy

DEFAULT_WINDOW_SIZES = (0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0)
DEFAULT_POOLINGS = (
    "min",
    "mean",
    "max",
    "mm:-0.1",
    "mm:0.1",
    "mm:-1",
    "mm:1",
    "mm:-10",
    "mm:10",
    "mm:-100",
    "mm:100",
)

CSV_COLUMNS = (
    "label",
    "layer",
    "window_s",
    "pooling",
    "protocol",
    "f1",
    "per_fold_f1",
    "tp",
    "fp",
    "fn",
    "tn",
    "status",
)


class ConfigError(ValueError):
    """Invalid experiment configuration or failed store validation."""


@dataclass
class ExperimentConfig:
    store_root: str
    manifest_path: str
    labels: list[str] | str = "all"
    layers: list[int] | str = "all"
    window_sizes_s: list[float] = field(default_factory=lambda: list(DEFAULT_WINDOW_SIZES))
    poolings: list[str] = field(default_factory=lambda: list(DEFAULT_POOLINGS))
    protocol: EvalProtocol = field(default_factory=EvalProtocol)
    probe: dict = field(default_factory=dict)
    parallelism: int = 1
    output_path: str | None = None
    output_format: str = "csv"

    def __post_init__(self) -> None:
        if not self.window_sizes_s:
            raise ConfigError("window_sizes_s must be non-empty")
        if not self.poolings:
            raise ConfigError("poolings must be non-empty")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.output_format!r}")
        for p in self.poolings:
            PoolingStrategy.parse(p)  # fail fast on typos

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        proto = doc.pop("protocol", {})
        if isinstance(proto, dict):
            proto = EvalProtocol(
                kind=proto.get("kind", "kfold"),
                k=int(proto.get("k", 5)),
                decision_threshold=float(proto.get("decision_threshold", 0.5)),
                aggregation=proto.get("aggregation", "pool"),
                undersample_majority=bool(proto.get("undersample_majority", False)),
                seed=int(proto.get("seed", 0)),
            )
        output = doc.pop("output", None)
        if output:
            doc.setdefault("output_path", output.get("path"))
            doc.setdefault("output_format", output.get("format", "csv"))
        try:
            return cls(protocol=proto, **doc)
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        proto = doc.pop("protocol")
        proto.pop("pooling", None)  # pooling is a grid axis, not part of the protocol identity
        doc["protocol"] = proto
        return doc

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class ResultTable:
    rows: list[ResultRow]
    provenance: dict = field(default_factory=dict)

    @property
    def any_failed(self) -> bool:
        return any(r.failed for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "provenance": dict(self.provenance),
            "rows": [dataclasses.asdict(r) for r in self.rows],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ResultTable":
        rows = [ResultRow(**r) for r in doc["rows"]]
        return cls(rows=rows, provenance=dict(doc.get("provenance", {})))


def _resolve_axes(config: ExperimentConfig, manifest: Manifest, store: EmbeddingStore):
    labels = manifest.label_names if config.labels == "all" else list(config.labels)
    for label in labels:
        if label not in manifest.label_definitions:
            raise ConfigError(f"label {label!r} not defined in manifest")
    layers = store.discover_layers() if config.layers == "all" else [int(l) for l in config.layers]
    if not layers:
        raise ConfigError(f"no layers found in store {store.root}")
    return labels, layers


def _group_rows(config: ExperimentConfig, label: str, layer: int, window_s: float) -> list[ResultRow]:
    manifest = load_manifest(config.manifest_path)
    if config.protocol.aggregation == MIDDLE_WINDOW_ONLY:
        strategies = [None]
    else:
        strategies = [PoolingStrategy.parse(p) for p in config.poolings]
    try:
        return evaluate_cell_group(
            config.store_root, manifest, label, layer, window_s,
            config.protocol, strategies, config.probe,
        )
    except Exception as exc:  # per-cell failures must not abort the sweep
        protocol_summary = config.protocol.summary()
        rows = []
        for strategy in strategies:
            rows.append(
                ResultRow(
                    label=label,
                    layer=layer,
                    window_s=window_s,
                    pooling="middle" if strategy is None else strategy.serialize(),
                    protocol=protocol_summary,
                    f1=None,
                    status=f"error: {exc}",
                )
            )
        return rows


def _group_rows_no_reuse(config: ExperimentConfig, label: str, layer: int, window_s: float) -> list[ResultRow]:
    manifest = load_manifest(config.manifest_path)
    rows = []
    for p in config.poolings:
        strategy = PoolingStrategy.parse(p)
        proto = dataclasses.replace(config.protocol, pooling=strategy)
        try:
            rows.append(
                evaluate_config(
                    config.store_root, manifest, label, layer, window_s, proto, config.probe
                )
            )
        except Exception as exc:
            rows.append(
                ResultRow(
                    label=label, layer=layer, window_s=window_s,
                    pooling=strategy.serialize(), protocol=proto.summary(),
                    f1=None, status=f"error: {exc}",
                )
            )
    return rows


def _worker(payload: tuple) -> list[ResultRow]:
    config_doc, label, layer, window_s, reuse = payload
    config = ExperimentConfig.from_dict(config_doc)
    fn = _group_rows if reuse else _group_rows_no_reuse
    return fn(config, label, layer, window_s)


def run_grid(config: ExperimentConfig, reuse_probes: bool = True) -> ResultTable:
    """Evaluate every
    (label, layer, window, pooling) cell exactly once.

    Cell errors are recorded in the row status instead of aborting the run.
    Output is independent of ``parallelism`` and identical across reruns.
    """
    started = time.perf_counter()
    manifest = load_manifest(config.manifest_path)
    store = EmbeddingStore(config.store_root)
    labels, layers = _resolve_axes(config, manifest, store)
    report = validate_manifest(
        manifest, config.store_root, layers=layers, min_window_s=min(config.window_sizes_s)
    )
    if not report.ok:
        raise ConfigError(f"store validation failed:\n{report.summary()}")

    groups = [
        (label, layer, float(window_s))
        for label in labels
        for layer in layers
        for window_s in config.window_sizes_s
    ]
    config_doc = config.to_dict()
    payloads = [(config_doc, label, layer, window_s, reuse_probes) for label, layer, window_s in groups]

    rows: list[ResultRow] = []
    if config.parallelism > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            for group_rows in pool.map(_worker, payloads):
                rows.extend(group_rows)
    else:
        for payload in payloads:
            rows.extend(_worker(payload))

    rows.sort(key=lambda r: (r.label, r.layer, r.window_s, r.pooling))
    provenance = {
        "engine_version": ENGINE_VERSION,
        "config_hash": config.config_hash(),
        "seed": config.protocol.seed,
        "parallelism": config.parallelism,
        "n_cells": len(rows),
        "wall_clock_s": round(time.perf_counter() - started, 3),
    }
    return ResultTable(rows=rows, provenance=provenance)


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(table: ResultTable, path: str | Path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for r in table.rows:
        lines.append(
            ",".join(
                (
                    r.label,
                    str(r.layer),
                    repr(r.window_s),
                    r.pooling,
                    r.protocol,
                    _csv_cell(r.f1),
                    ";".join(repr(v) for v in r.per_fold_f1),
                    str(r.tp),
                    str(r.fp),
                    str(r.fn),
                    str(r.tn),
                    r.status.replace(",", ";").replace("\n", " "),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(table: ResultTable, path: str | Path) -> None:
    Path(path).write_text(json.dumps(table.to_dict(), indent=2) + "\n")


def emit_results(table: ResultTable, path: str | Path, fmt: str) -> Path:
    """Write the table as ``csv`` (fixed, plot-ready columns) or ``json``."""
    if not table.rows:
        raise ValueError("refusing to emit an empty result table")
    path = Path(path)
    if fmt == "csv":
        write_csv(table, path)
    elif fmt == "json":
        write_json(table, path)
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    return path


def read_results(path: str | Path) -> ResultTable:
    """Load a result table previously written by ``emit_results``."""
    path = Path(path)
    if path.suffix == ".json":
        return ResultTable.from_dict(json.loads(path.read_text()))
    lines = path.read_text().splitlines()
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise ValueError(f"{path}: not a layerprobe CSV result file")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ValueError(f"{path}: malformed row: {line!r}")
        rows.append(
            ResultRow(
                label=parts[0],
                layer=int(parts[1]),
                window_s=float(parts[2]),
                pooling=parts[3],
                protocol=parts[4],
                f1=float(parts[5]) if parts[5] else None,
                per_fold_f1=[float(v) for v in parts[6].split(";") if v],
                tp=int(parts[7]),
                fp=int(parts[8]),
                fn=int(parts[9]),
                tn=int(parts[10]),
                status=parts[11],
            )
        )
    return ResultTable(rows=rows)


def best_layer_report(table: ResultTable) -> dict:
    """Best layer per label plus both macro summaries.

    ``macro_mean_of_per_label_bests`` averages each label's own best layer;
    ``best_layer_by_mean`` picks the single layer whose across-label mean is
    highest. Ties break toward the lowest layer index.
    """
    best_cell: dict[tuple[str, int], float] = {}
    for r in table.rows:
        if r.f1 is None:
            continue
        key = (r.label, r.layer)
        if key not in best_cell or r.f1 > best_cell[key]:
            best_cell[key] = r.f1
    if not best_cell:
        raise ValueError("result table has no successful rows")

    labels = sorted({label for label, _ in best_cell})
    per_label = {}
    for label in labels:
        candidates = sorted(
            ((layer, f1) for (lbl, layer), f1 in best_cell.items() if lbl == label),
            key=lambda item: (-item[1], item[0]),
        )
        layer, f1 = candidates[0]
        per_label[label] = {"layer": layer, "f1": f1}

    layers_all = sorted({layer for _, layer in best_cell})
    by_mean = None
    for layer in layers_all:
        values = [best_cell[(label, layer)] for label in labels if (label, layer) in best_cell]
        if len(values) != len(labels):
            continue
        mean = sum(values) / len(values)
        if by_mean is None or mean > by_mean["mean_f1"]:
            by_mean = {"layer": layer, "mean_f1": mean}

    return {
        "per_label": per_label,
        "macro_mean_of_per_label_bests": sum(v["f1"] for v in per_label.values()) / len(per_label),
        "best_layer_by_mean": by_mean,
    }
