"""Shared fixtures: hand-built embedding stores with controllable signal."""

import numpy as np
import pytest

from layerprobe.embedding_io import EmbeddingSequence, EmbeddingStore, write_embedding_file
from layerprobe.manifest import LabelDefinition, Manifest, RecordingRecord


def build_planted_store(
    root,
    n_speakers=20,
    recs_per_speaker=1,
    duration_s=30.0,
    frame_hz=4.0,
    dim=8,
    n_layers=2,
    signal_layer=1,
    effect=4.0,
    positive_rate=0.5,
    k=5,
    seed=0,
    signal_span=None,  # (start_frac, end_frac) of the recording; default whole
):
    """Deterministic store + kfold manifest with a mean-shift class signal."""
    root.mkdir(parents=True, exist_ok=True)
    store = EmbeddingStore(root)
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    n_frames = int(round(duration_s * frame_hz))
    lo_frac, hi_frac = signal_span if signal_span else (0.0, 1.0)
    lo, hi = int(lo_frac * n_frames), max(int(lo_frac * n_frames) + 1, int(hi_frac * n_frames))

    records = []
    idx = 0
    for s in range(n_speakers):
        positive = rng.random() < positive_rate
        for _ in range(recs_per_speaker):
            rid = f"rec{idx:03d}"
            for layer in range(n_layers):
                frames = rng.standard_normal((n_frames, dim))
                if positive and layer == signal_layer:
                    frames[lo:hi] += effect * direction
                write_embedding_file(
                    EmbeddingSequence(rid, layer, frame_hz, frames.astype(np.float32)),
                    store.path_for(rid, layer),
                )
            records.append(
                RecordingRecord(
                    recording_id=rid,
                    speaker_id=f"spk{s:03d}",
                    duration_s=n_frames / frame_hz,
                    task="Spontaneous",
                    labels={"target": positive},
                    fold=s % k,
                )
            )
            idx += 1

    manifest = Manifest(
        label_definitions={
            "target": LabelDefinition(questionnaire="synthetic", threshold=0.5, rule="score >= threshold")
        },
        records=tuple(records),
        protocol_kind="kfold",
        n_folds=k,
        speaker_disjoint=True,
    )
    return store, manifest


@pytest.fixture(scope="session")
def planted_store(tmp_path_factory):
    root = tmp_path_factory.mktemp("planted")
    return build_planted_store(root / "store", seed=12)
