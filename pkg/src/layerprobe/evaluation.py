"""Metrics, split protocols, undersampling, and the per-configuration pipeline.

``evaluate_config`` runs, for one (label, layer, window size, pooling,
protocol) cell: per fold, optionally undersample the training recordings,
window every recording, fit the probe on all training windows (each window
carries its recording's label), score the test windows, aggregate them per
recording, and compute the recording-level F1. The row-level F1 is the
unweighted mean of the per-fold F1s.

Deterministic ordering contract: training windows are stacked by manifest
record order, each recording's windows in time order. Everything is a pure
function of (store, manifest, configuration, seeds).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .embedding_io import EmbeddingStore
from .manifest import HOLDOUT, KFOLD, Manifest, RecordingRecord
from .pooling import PoolingStrategy, pool
from .probe import DegenerateTrainingError, LogisticProbe
from .validation import as_binary_labels
from .windowing import middle_window_index, windows_for_recording

POOL_ALL_WINDOWS = "pool"
MIDDLE_WINDOW_ONLY = "middle"


class DegenerateFoldError(ValueError):
    """A training fold ended up single-class (possibly after undersampling)."""

    def __init__(self, fold: int, message: str):
        super().__init__(message)
        self.fold = fold


def confusion_counts(pred, truth) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) for boolean prediction/truth vectors."""
    pred = as_binary_labels(pred, "pred").astype(bool)
    truth = as_binary_labels(truth, "truth").astype(bool)
    if pred.size != truth.size:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {truth.size} truths")
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    fn = int(np.sum(~pred & truth))
    tn = int(np.sum(~pred & ~truth))
    return tp, fp, fn, tn


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    """2*tp / (2*tp + fp + fn); 0.0 when there are no positives anywhere."""
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2.0 * tp / denom


def binary_f1(pred, truth) -> float:
    tp, fp, fn, _ = confusion_counts(pred, truth)
    return f1_from_counts(tp, fp, fn)


def macro_f1(per_label) -> float:
    """Unweighted mean of per-label F1 scores."""
    if not per_label:
        raise ValueError("per_label map must be non-empty")
    return float(np.mean(list(per_label.values())))


def undersample(labels, seed) -> np.ndarray:
    """Sorted indices keeping all minority samples and an equal-size random
    subset of the majority, drawn without replacement from ``seed``."""
    labels = as_binary_labels(labels, "labels").astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("undersample requires both classes present")
    if n_pos == n_neg:
        return np.arange(labels.size)
    minority = labels if n_pos < n_neg else ~labels
    keep = np.flatnonzero(minority)
    majority_idx = np.flatnonzero(~minority)
    rng = np.random.default_rng(seed)
    drawn = rng.choice(majority_idx, size=keep.size, replace=False)
    return np.sort(np.concatenate([keep, drawn]))


def kfold_speaker_groups(records: Sequence[RecordingRecord], k: int, seed) -> dict[str, int]:
    """Assign speakers to k folds: shuffle by seed, deal round-robin.

    All recordings of a speaker land in one fold and fold sizes differ by at
    most one speaker.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    speakers = sorted({rec.speaker_id for rec in records})
    if len(speakers) < k:
        raise ValueError(f"need at least {k} distinct speakers, got {len(speakers)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(speakers))
    return {speakers[int(idx)]: pos % k for pos, idx in enumerate(order)}


def recording_prediction(
    window_probs, strategy: PoolingStrategy | str, threshold: float = 0.5
) -> tuple[float, bool]:
    """Pool per-window probabilities and threshold (score >= threshold)."""
    score = pool(window_probs, strategy)
    return score, score >= threshold


@dataclass(frozen=True)
class EvalProtocol:
    """How one configuration is evaluated.

    ``aggregation`` is "pool" (reduce all window scores with ``pooling``) or
    "middle" (score of the central window only, pooling ignored).
    """

    kind: str = KFOLD
    k: int = 5
    decision_threshold: float = 0.5
    aggregation: str = POOL_ALL_WINDOWS
    pooling: PoolingStrategy | None = None
    undersample_majority: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in (HOLDOUT, KFOLD):
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if self.kind == KFOLD and self.k < 2:
            raise ValueError("kfold protocol requires k >= 2")
        if not (0.0 < self.decision_threshold < 1.0):
            raise ValueError("decision_threshold must lie strictly inside (0, 1)")
        if self.aggregation not in (POOL_ALL_WINDOWS, MIDDLE_WINDOW_ONLY):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")

    def summary(self) -> str:
        base = f"kfold({self.k})" if self.kind == KFOLD else "holdout"
        if self.undersample_majority:
            base += "+undersample"
        return base

    def pooling_name(self) -> str:
        if self.aggregation == MIDDLE_WINDOW_ONLY:
            return "middle"
        if self.pooling is None:
            raise ValueError("pool aggregation requires a pooling strategy")
        return self.pooling.serialize()


@dataclass
class ResultRow:
    """One evaluated grid cell plus diagnostics."""

    label: str
    layer: int
    window_s: float
    pooling: str
    protocol: str
    f1: float | None
    per_fold_f1: list[float] = field(default_factory=list)
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    n_train_recordings: int = 0
    n_test_recordings: int = 0
    n_train_windows: int = 0
    n_test_windows: int = 0
    status: str = "ok"
    flags: list[str] = field(default_factory=list)
    probe_key: str = ""

    @property
    def failed(self) -> bool:
        return self.status != "ok"


def fold_splits(manifest: Manifest, protocol: EvalProtocol):
    """Yield (fold_index, train_records, test_records) per the protocol."""
    if protocol.kind != manifest.protocol_kind:
        raise ValueError(
            f"protocol kind {protocol.kind!r} does not match manifest protocol "
            f"{manifest.protocol_kind!r}"
        )
    if protocol.kind == HOLDOUT:
        train = [r for r in manifest.records if r.split == "train"]
        test = [r for r in manifest.records if r.split == "test"]
        yield 0, train, test
        return
    if protocol.k != manifest.n_folds:
        raise ValueError(f"protocol k={protocol.k} but manifest has {manifest.n_folds} folds")
    for fold in range(manifest.n_folds):
        train = [r for r in manifest.records if r.fold != fold]
        test = [r for r in manifest.records if r.fold == fold]
        yield fold, train, test


def probe_cache_key(label: str, layer: int, window_s: float, fold: int, protocol: EvalProtocol) -> str:
    """Stable identifier for one probe fit; pooling deliberately excluded."""
    text = (
        f"{label}|{layer}|{window_s!r}|{fold}|{protocol.kind}|{protocol.k}|"
        f"{protocol.undersample_majority}|{protocol.seed}"
    )
    return f"{zlib.crc32(text.encode()):08x}"


@dataclass
class _FoldScores:
    """Per-fold fit outcome: window probabilities for every test recording."""

    fold: int
    test_truth: np.ndarray           # bool per test recording
    test_window_probs: list[np.ndarray]
    n_train_recordings: int
    n_test_recordings: int
    n_train_windows: int
    n_test_windows: int
    probe_key: str
    converged: bool


def _undersample_seed(seed: int, label: str, fold: int) -> list[int]:
    return [seed, zlib.crc32(label.encode()), fold]


def _window_matrix(store: EmbeddingStore, rec: RecordingRecord, layer: int, window_s: float) -> np.ndarray:
    seq = store.load(rec.recording_id, layer)
    return np.stack([w.vector for w in windows_for_recording(seq, window_s)])


def _fit_fold(
    window_vectors: dict[str, np.ndarray],
    label: str,
    layer: int,
    window_s: float,
    protocol: EvalProtocol,
    probe_params: dict,
    fold: int,
    train_recs: list[RecordingRecord],
    test_recs: list[RecordingRecord],
) -> _FoldScores:
    train_recs = [r for r in train_recs if label in r.labels]
    test_recs = [r for r in test_recs if label in r.labels]
    if not train_recs or not test_recs:
        raise DegenerateFoldError(fold, f"fold {fold}: no labeled train or test recordings")

    if protocol.undersample_majority:
        labels = [r.labels[label] for r in train_recs]
        try:
            kept = undersample(labels, _undersample_seed(protocol.seed, label, fold))
        except ValueError as exc:
            raise DegenerateFoldError(fold, f"fold {fold}: {exc}") from exc
        train_recs = [train_recs[i] for i in kept]

    train_blocks = []
    train_labels = []
    for rec in train_recs:
        vectors = window_vectors[rec.recording_id]
        train_blocks.append(vectors)
        train_labels.extend([rec.labels[label]] * len(vectors))
    X_train = np.vstack(train_blocks)
    y_train = np.asarray(train_labels, dtype=np.int64)

    probe = LogisticProbe(**probe_params)
    try:
        probe.fit(X_train, y_train)
    except DegenerateTrainingError as exc:
        raise DegenerateFoldError(fold, f"fold {fold}: {exc}") from exc

    test_probs = []
    truth = []
    n_test_windows = 0
    for rec in test_recs:
        vectors = window_vectors[rec.recording_id]
        test_probs.append(probe.positive_proba(vectors))
        truth.append(rec.labels[label])
        n_test_windows += len(vectors)

    return _FoldScores(
        fold=fold,
        test_truth=np.asarray(truth, dtype=bool),
        test_window_probs=test_probs,
        n_train_recordings=len(train_recs),
        n_test_recordings=len(test_recs),
        n_train_windows=X_train.shape[0],
        n_test_windows=n_test_windows,
        probe_key=probe_cache_key(label, layer, window_s, fold, protocol),
        converged=probe.converged_,
    )


def _aggregate(fold_scores: list[_FoldScores], protocol: EvalProtocol,
               label: str, layer: int, window_s: float) -> ResultRow:
    per_fold_f1 = []
    tp = fp = fn = tn = 0
    flags = []
    totals = dict(n_train_recordings=0, n_test_recordings=0, n_train_windows=0, n_test_windows=0)
    for fs in fold_scores:
        preds = []
        for probs in fs.test_window_probs:
            if protocol.aggregation == MIDDLE_WINDOW_ONLY:
                score = float(probs[middle_window_index(len(probs))])
                preds.append(score >= protocol.decision_threshold)
            else:
                _, pred = recording_prediction(probs, protocol.pooling, protocol.decision_threshold)
                preds.append(pred)
        ftp, ffp, ffn, ftn = confusion_counts(preds, fs.test_truth)
        if 2 * ftp + ffp + ffn == 0:
            flags.append(f"degenerate_f1_fold{fs.fold}")
        if not fs.converged:
            flags.append(f"probe_not_converged_fold{fs.fold}")
        per_fold_f1.append(f1_from_counts(ftp, ffp, ffn))
        tp, fp, fn, tn = tp + ftp, fp + ffp, fn + ffn, tn + ftn
        totals["n_train_recordings"] += fs.n_train_recordings
        totals["n_test_recordings"] += fs.n_test_recordings
        totals["n_train_windows"] += fs.n_train_windows
        totals["n_test_windows"] += fs.n_test_windows
    return ResultRow(
        label=label,
        layer=layer,
        window_s=window_s,
        pooling=protocol.pooling_name(),
        protocol=protocol.summary(),
        f1=float(np.mean(per_fold_f1)),
        per_fold_f1=per_fold_f1,
        tp=tp, fp=fp, fn=fn, tn=tn,
        **totals,
        flags=sorted(set(flags)),
        probe_key="+".join(fs.probe_key for fs in fold_scores),
    )


def evaluate_cell_group(
    store: EmbeddingStore | str | Path,
    manifest: Manifest,
    label: str,
    layer: int,
    window_s: float,
    protocol: EvalProtocol,
    strategies: Sequence[PoolingStrategy | None],
    probe_params: dict | None = None,
) -> list[ResultRow]:
    """Evaluate several pooling strategies that share (label, layer, window).

    The probe is fit once per fold and reused across strategies, since
    pooling never affects training. BLAS pools are pinned to one thread so
    results are identical under any parallel scheduling.
    """
    if not isinstance(store, EmbeddingStore):
        store = EmbeddingStore(store)
    if label not in manifest.label_definitions:
        raise ValueError(f"unknown label {label!r}")
    probe_params = dict(probe_params or {})
    probe_params.setdefault("seed", protocol.seed)
    with threadpool_limits(limits=1):
        window_vectors = {
            rec.recording_id: _window_matrix(store, rec, layer, window_s)
            for rec in manifest.records
            if label in rec.labels
        }
        fold_scores = [
            _fit_fold(window_vectors, label, layer, window_s, protocol, probe_params, fold, train, test)
            for fold, train, test in fold_splits(manifest, protocol)
        ]
        rows = []
        for strategy in strategies:
            proto = replace(protocol, pooling=strategy)
            rows.append(_aggregate(fold_scores, proto, label, layer, window_s))
    return rows


def evaluate_config(
    store: EmbeddingStore | str | Path,
    manifest: Manifest,
    label: str,
    layer: int,
    window_s: float,
    protocol: EvalProtocol,
    probe_params: dict | None = None,
) -> ResultRow:
    """Evaluate a single grid cell under ``protocol``."""
    return evaluate_cell_group(
        store, manifest, label, layer, window_s, protocol, [protocol.pooling], probe_params
    )[0]
