"""Dataset manifest: recordings, labels, split protocol, and store validation.

The manifest is a single JSON document (see ``docs/manifest.schema.json``):

    {
      "label_definitions": {"<name>": {"questionnaire": str,
                                       "threshold": number,
                                       "rule": "score > threshold" | "score >= threshold"}},
      "protocol": {"kind": "holdout"} | {"kind": "kfold", "k": int},
      "speaker_disjoint": bool,            # optional, default false
      "records": [{"recording_id": str, "speaker_id": str, "duration_s": number,
                   "task": "Elicited" | "Spontaneous",
                   "labels": {"<name>": bool},
                   "split": "train" | "test"     # holdout manifests
                   "fold": int                   # kfold manifests
                  }, ...]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .embedding_io import EmbeddingFormatError, EmbeddingStore

HOLDOUT = "holdout"
KFOLD = "kfold"
TASKS = ("Elicited", "Spontaneous")
RULES = ("score > threshold", "score >= threshold")

DURATION_TOLERANCE = 0.02  # relative mismatch allowed between manifest and store


class ManifestError(ValueError):
    """Raised when a manifest document violates its invariants."""


@dataclass(frozen=True)
class LabelDefinition:
    questionnaire: str
    threshold: float
    rule: str = "score > threshold"

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise ManifestError(f"unknown label rule {self.rule!r}; expected one of {RULES}")

    def binarize(self, score: float) -> bool:
        """Apply the threshold rule to a raw questionnaire score."""
        if self.rule == "score > threshold":
            return score > self.threshold
        return score >= self.threshold


@dataclass(frozen=True)
class RecordingRecord:
    recording_id: str
    speaker_id: str
    duration_s: float
    task: str
    labels: dict[str, bool]
    split: str | None = None  # "train" | "test" under holdout
    fold: int | None = None   # fold index under kfold

    def __post_init__(self) -> None:
        if not (self.duration_s > 0):
            raise ManifestError(f"record {self.recording_id!r}: duration_s must be positive")
        if self.task not in TASKS:
            raise ManifestError(f"record {self.recording_id!r}: unknown task {self.task!r}")
        if self.split is not None and self.split not in ("train", "test"):
            raise ManifestError(f"record {self.recording_id!r}: split must be 'train' or 'test'")


@dataclass(frozen=True)
class Manifest:
    label_definitions: dict[str, LabelDefinition]
    records: tuple[RecordingRecord, ...]
    protocol_kind: str
    n_folds: int | None = None
    speaker_disjoint: bool = False

    def __post_init__(self) -> None:
        self._check()

    def _check(self) -> None:
        if self.protocol_kind not in (HOLDOUT, KFOLD):
            raise ManifestError(f"unknown protocol kind {self.protocol_kind!r}")
        if self.protocol_kind == KFOLD:
            if self.n_folds is None or self.n_folds < 2:
                raise ManifestError("kfold protocol requires k >= 2")
        seen: set[str] = set()
        for rec in self.records:
            if rec.recording_id in seen:
                raise ManifestError(f"duplicate recording_id {rec.recording_id!r}")
            seen.add(rec.recording_id)
            for name in rec.labels:
                if name not in self.label_definitions:
                    raise ManifestError(
                        f"record {rec.recording_id!r} carries unknown label {name!r}"
                    )
            if self.protocol_kind == KFOLD:
                if rec.fold is None:
                    raise ManifestError(f"record {rec.recording_id!r} has no fold index")
                if not (0 <= rec.fold < self.n_folds):
                    raise ManifestError(
                        f"record {rec.recording_id!r}: fold {rec.fold} out of range [0, {self.n_folds})"
                    )
            else:
                if rec.split is None:
                    raise ManifestError(f"record {rec.recording_id!r} has no split assignment")
        if self.speaker_disjoint:
            self._check_speaker_disjoint()

    def _check_speaker_disjoint(self) -> None:
        groups: dict[str, set] = {}
        for rec in self.records:
            key = rec.fold if self.protocol_kind == KFOLD else rec.split
            groups.setdefault(rec.speaker_id, set()).add(key)
        for speaker, keys in groups.items():
            if len(keys) > 1:
                where = "folds" if self.protocol_kind == KFOLD else "splits"
                raise ManifestError(
                    f"speaker {speaker!r} appears in multiple {where} {sorted(keys)} "
                    "but the manifest is declared speaker_disjoint"
                )

    @property
    def label_names(self) -> list[str]:
        return sorted(self.label_definitions)

    def fold_indices(self) -> list[int]:
        if self.protocol_kind != KFOLD:
            raise ManifestError("fold_indices: manifest protocol is not kfold")
        return list(range(self.n_folds))

    def to_dict(self) -> dict:
        protocol = {"kind": self.protocol_kind}
        if self.protocol_kind == KFOLD:
            protocol["k"] = self.n_folds
        records = []
        for rec in self.records:
            row = {
                "recording_id": rec.recording_id,
                "speaker_id": rec.speaker_id,
                "duration_s": rec.duration_s,
                "task": rec.task,
                "labels": dict(rec.labels),
            }
            if self.protocol_kind == KFOLD:
                row["fold"] = rec.fold
            else:
                row["split"] = rec.split
            records.append(row)
        return {
            "label_definitions": {
                name: {"questionnaire": d.questionnaire, "threshold": d.threshold, "rule": d.rule}
                for name, d in self.label_definitions.items()
            },
            "protocol": protocol,
            "speaker_disjoint": self.speaker_disjoint,
            "records": records,
        }


def manifest_from_dict(doc: dict) -> Manifest:
    try:
        protocol = doc["protocol"]
        kind = protocol["kind"]
        defs = {
            name: LabelDefinition(
                questionnaire=d["questionnaire"],
                threshold=float(d["threshold"]),
                rule=d.get("rule", "score > threshold"),
            )
            for name, d in doc["label_definitions"].items()
        }
        records = tuple(
            RecordingRecord(
                recording_id=r["recording_id"],
                speaker_id=r["speaker_id"],
                duration_s=float(r["duration_s"]),
                task=r["task"],
                labels={k: bool(v) for k, v in r["labels"].items()},
                split=r.get("split"),
                fold=r.get("fold"),
            )
            for r in doc["records"]
        )
    except KeyError as exc:
        raise ManifestError(f"manifest document missing required field {exc}") from exc
    return Manifest(
        label_definitions=defs,
        records=records,
        protocol_kind=kind,
        n_folds=int(protocol["k"]) if kind == KFOLD else None,
        speaker_disjoint=bool(doc.get("speaker_disjoint", False)),
    )


def load_manifest(path: str | Path) -> Manifest:
    """Parse and fully validate a manifest JSON document."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON: {exc}") from exc
    return manifest_from_dict(doc)


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")


@dataclass
class ValidationReport:
    """Outcome of checking a manifest against an embedding store."""

    errors: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def summary(self) -> str:
        lines = [f"{len(self.errors)} error(s), {len(self.warnings)} warning(s)"]
        lines += [f"ERROR   {rid}: {msg}" for rid, msg in self.errors]
        lines += [f"WARNING {rid}: {msg}" for rid, msg in self.warnings]
        return "\n".join(lines)


def validate_manifest(
    manifest: Manifest,
    store_root: str | Path,
    layers: list[int] | None = None,
    min_window_s: float | None = None,
) -> ValidationReport:
    """Check that every (record, layer) resolves to a consistent embedding file.

    ``layers`` defaults to the union of layers discovered in the store.
    Errors: missing/corrupt files, recording-id mismatches, and manifest
    durations that disagree with ``n_frames / frame_hz`` by more than 2%.
    Warnings: recordings shorter than ``min_window_s`` (these fall back to a
    single degenerate window downstream).
    """
    store = EmbeddingStore(store_root)
    report = ValidationReport()
    if layers is None:
        layers = store.discover_layers()
    if not layers:
        report.errors.append(("<store>", f"no embedding files found under {store.root}"))
        return report
    for rec in manifest.records:
        for layer in layers:
            path = store.path_for(rec.recording_id, layer)
            if not path.is_file():
                report.errors.append(
                    (rec.recording_id, f"missing embedding file for layer {layer}: {path.name}")
                )
                continue
            try:
                header = store.header(rec.recording_id, layer)
            except (EmbeddingFormatError, OSError) as exc:
                report.errors.append((rec.recording_id, f"layer {layer}: {exc}"))
                continue
            if header.recording_id != rec.recording_id:
                report.errors.append(
                    (
                        rec.recording_id,
                        f"layer {layer}: file header names recording {header.recording_id!r}",
                    )
                )
                continue
            mismatch = abs(header.duration_s - rec.duration_s) / rec.duration_s
            if mismatch > DURATION_TOLERANCE:
                report.errors.append(
                    (
                        rec.recording_id,
                        f"layer {layer}: duration mismatch: store has "
                        f"{header.duration_s:.3f}s ({header.n_frames} frames at {header.frame_hz:g} Hz), "
                        f"manifest says {rec.duration_s:.3f}s ({mismatch:.1%} > {DURATION_TOLERANCE:.0%})",
                    )
                )
        if min_window_s is not None and rec.duration_s < min_window_s:
            report.warnings.append(
                (
                    rec.recording_id,
                    f"duration {rec.duration_s:.3f}s is shorter than the smallest "
                    f"configured window ({min_window_s:g}s); a degenerate window will be used",
                )
            )
    return report
