"""Synthetic embedding stores with a planted, controllable class signal.

Frames are unit-Gaussian noise. For recordings whose speaker is positive
for a label, frames inside one contiguous span (a ``window_sparsity``
fraction of the recording) are shifted by ``effect_size`` along a seeded
random unit direction, but only in the designated signal layers. Labels are
assigned per speaker so speaker-disjoint folds stay meaningful, and fold
assignments come from :func:`layerprobe.evaluation.kfold_speaker_groups`.

Everything is a deterministic function of the spec seed: per-frame noise is
drawn from an rng keyed by (seed, recording index, layer), so regenerating
any subset reproduces identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding_io import EmbeddingSequence, EmbeddingStore, write_embedding_file
from .evaluation import kfold_speaker_groups
from .manifest import (
    KFOLD,
    LabelDefinition,
    Manifest,
    RecordingRecord,
    write_manifest,
)

SHARED = "shared"
INDEPENDENT = "independent"


@dataclass(frozen=True)
class SynthSpec:
    n_speakers: int = 60
    recordings_per_speaker: int = 2
    duration_min_s: float = 20.0
    duration_max_s: float = 40.0
    dim: int = 16
    n_layers: int = 5
    frame_hz: float = 4.0
    signal_layers: tuple[int, ...] = (2,)
    effect_size: float = 5.0
    window_sparsity: float = 1.0
    positive_rate: float = 0.5
    labels: tuple[str, ...] = ("target",)
    label_directions: str = INDEPENDENT
    n_folds: int = 5
    task: str = "Spontaneous"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_speakers < self.n_folds:
            raise ValueError("need at least one speaker per fold")
        if not all(0 <= l < self.n_layers for l in self.signal_layers):
            raise ValueError(f"signal_layers {self.signal_layers} outside [0, {self.n_layers})")
        if self.effect_size < 0:
            raise ValueError("effect_size must be >= 0")
        if not (0.0 < self.window_sparsity <= 1.0):
            raise ValueError("window_sparsity must lie in (0, 1]")
        if not (0.0 < self.positive_rate < 1.0):
            raise ValueError("positive_rate must lie in (0, 1)")
        if not self.labels:
            raise ValueError("labels must be non-empty")
        if self.label_directions not in (SHARED, INDEPENDENT):
            raise ValueError(f"label_directions must be {SHARED!r} or {INDEPENDENT!r}")
        if not (0 < self.duration_min_s <= self.duration_max_s):
            raise ValueError("need 0 < duration_min_s <= duration_max_s")

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthSpec":
        doc = dict(doc)
        for key in ("signal_layers", "labels"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _span_frames(start_s: float, length_s: float, frame_hz: float, n_frames: int) -> tuple[int, int]:
    lo = max(0, int(math.ceil(start_s * frame_hz - 1e-9)))
    hi = min(n_frames, int(math.ceil((start_s + length_s) * frame_hz - 1e-9)))
    if hi <= lo:  # spans shorter than one frame period still mark one frame
        lo = min(lo, n_frames - 1)
        hi = lo + 1
    return lo, hi


def generate(spec: SynthSpec, out_dir: str | Path) -> tuple[Path, Path]:
    """Write the embedding store and manifest; returns (store_root, manifest_path)."""
    out_dir = Path(out_dir)
    store_root = out_dir / "embeddings"
    store_root.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.json"

    meta_rng = np.random.default_rng([spec.seed, 0])

    directions = {}
    for i, label in enumerate(spec.labels):
        if spec.label_directions == SHARED and i > 0:
            directions[label] = directions[spec.labels[0]]
            continue
        u = meta_rng.standard_normal(spec.dim)
        directions[label] = u / np.linalg.norm(u)

    speakers = [f"spk{i:03d}" for i in range(spec.n_speakers)]
    speaker_labels = {
        label: meta_rng.random(spec.n_speakers) < spec.positive_rate for label in spec.labels
    }

    n_recordings = spec.n_speakers * spec.recordings_per_speaker
    raw_durations = meta_rng.uniform(spec.duration_min_s, spec.duration_max_s, size=n_recordings)
    # Quantize durations to the frame grid so store and manifest agree exactly.
    frame_counts = np.maximum(1, np.rint(raw_durations * spec.frame_hz).astype(int))
    durations = frame_counts / spec.frame_hz

    spans: list[dict[str, tuple[float, float]]] = []
    for idx in range(n_recordings):
        by_label = {}
        for label in spec.labels:
            length = spec.window_sparsity * durations[idx]
            start = float(meta_rng.uniform(0.0, durations[idx] - length))
            by_label[label] = (start, length)
        spans.append(by_label)

    records = []
    rec_meta = []
    idx = 0
    for s_i, speaker in enumerate(speakers):
        for _ in range(spec.recordings_per_speaker):
            labels = {label: bool(speaker_labels[label][s_i]) for label in spec.labels}
            records.append(
                RecordingRecord(
                    recording_id=f"rec{idx:04d}",
                    speaker_id=speaker,
                    duration_s=float(durations[idx]),
                    task=spec.task,
                    labels=labels,
                )
            )
            rec_meta.append((idx, int(frame_counts[idx]), labels))
            idx += 1

    folds = kfold_speaker_groups(records, spec.n_folds, [spec.seed, 2])
    records = [
        RecordingRecord(
            recording_id=r.recording_id,
            speaker_id=r.speaker_id,
            duration_s=r.duration_s,
            task=r.task,
            labels=r.labels,
            fold=folds[r.speaker_id],
        )
        for r in records
    ]

    for rec, (rec_idx, n_frames, labels) in zip(records, rec_meta):
        for layer in range(spec.n_layers):
            rng = np.random.default_rng([spec.seed, 1, rec_idx, layer])
            frames = rng.standard_normal((n_frames, spec.dim))
            if layer in spec.signal_layers and spec.effect_size > 0:
                for label, positive in labels.items():
                    if not positive:
                        continue
                    start, length = spans[rec_idx][label]
                    lo, hi = _span_frames(start, length, spec.frame_hz, n_frames)
                    frames[lo:hi] += spec.effect_size * directions[label]
            seq = EmbeddingSequence(
                recording_id=rec.recording_id,
                layer_index=layer,
                frame_hz=spec.frame_hz,
                data=frames.astype(np.float32),
            )
            write_embedding_file(seq, EmbeddingStore(store_root).path_for(rec.recording_id, layer))

    manifest = Manifest(
        label_definitions={
            label: LabelDefinition(
                questionnaire=f"synthetic({label})", threshold=0.5, rule="score >= threshold"
            )
            for label in spec.labels
        },
        records=tuple(records),
        protocol_kind=KFOLD,
        n_folds=spec.n_folds,
        speaker_disjoint=True,
    )
    write_manifest(manifest, manifest_path)
    return store_root, manifest_path
