"""Metrics, undersampling, speaker folds, and the evaluation pipeline."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import f1_score as sklearn_f1

from layerprobe.evaluation import (
    DegenerateFoldError,
    EvalProtocol,
    binary_f1,
    confusion_counts,
    evaluate_cell_group,
    evaluate_config,
    fold_splits,
    kfold_speaker_groups,
    macro_f1,
    recording_prediction,
    undersample,
)
from layerprobe.manifest import Manifest, RecordingRecord
from layerprobe.pooling import PoolingStrategy

from conftest import build_planted_store

MEAN = PoolingStrategy.parse("mean")
MAX = PoolingStrategy.parse("max")


class TestF1:
    def test_perfect_prediction(self):
        assert binary_f1([True, False, True], [True, False, True]) == 1.0

    def test_all_negative_predictions(self):
        assert binary_f1([False, False, False], [True, False, True]) == 0.0

    def test_hand_built_confusion(self):
        # tp=2, fp=1, fn=1 -> 2*2 / (2*2 + 1 + 1) = 2/3
        pred = [True, True, True, False, False]
        truth = [True, True, False, True, False]
        assert confusion_counts(pred, truth) == (2, 1, 1, 1)
        assert binary_f1(pred, truth) == pytest.approx(2 / 3, rel=1e-12)
        assert binary_f1(pred, truth) == pytest.approx(sklearn_f1(truth, pred))

    def test_degenerate_all_negative_everywhere(self):
        assert binary_f1([False, False], [False, False]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            binary_f1([True], [True, False])

    @given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60))
    @settings(max_examples=300, deadline=None)
    def test_matches_sklearn(self, pairs):
        pred = [p for p, _ in pairs]
        truth = [t for _, t in pairs]
        assert binary_f1(pred, truth) == pytest.approx(
            sklearn_f1(truth, pred, zero_division=0.0)
        )


class TestMacroF1:
    def test_single_label(self):
        assert macro_f1({"a": 1.0}) == 1.0

    def test_two_labels(self):
        assert macro_f1({"a": 0.0, "b": 1.0}) == 0.5

    def test_four_questionnaires(self):
        scores = {"BDI": 0.49, "PHQ9": 0.42, "GAD7": 0.29, "AIS": 0.50}
        assert macro_f1(scores) == pytest.approx(0.425)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            macro_f1({})


class TestUndersample:
    def test_already_balanced_keeps_all(self):
        kept = undersample([True] * 3 + [False] * 3, seed=0)
        np.testing.assert_array_equal(kept, np.arange(6))

    def test_counts_equalized(self):
        labels = [True, True] + [False] * 6
        kept = undersample(labels, seed=1)
        assert len(kept) == 4
        values = [labels[i] for i in kept]
        assert sum(values) == 2 and len(values) - sum(values) == 2

    def test_minority_fully_kept_and_sorted(self):
        rng = np.random.default_rng(2)
        labels = rng.random(50) < 0.2
        labels[0] = True
        kept = undersample(labels, seed=7)
        assert np.all(np.diff(kept) > 0)
        minority = np.flatnonzero(labels) if labels.sum() < 25 else np.flatnonzero(~labels)
        assert set(minority).issubset(set(kept.tolist()))

    def test_deterministic(self):
        labels = [True] * 4 + [False] * 9
        np.testing.assert_array_equal(undersample(labels, seed=3), undersample(labels, seed=3))

    def test_different_seed_differs(self):
        labels = [True] * 2 + [False] * 40
        assert not np.array_equal(undersample(labels, seed=1), undersample(labels, seed=2))

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="both classes"):
            undersample([True, True], seed=0)


def records_for_speakers(speaker_ids):
    return [
        RecordingRecord(
            recording_id=f"r{i}", speaker_id=s, duration_s=10.0,
            task="Elicited", labels={}, fold=0,
        )
        for i, s in enumerate(speaker_ids)
    ]


class TestKFoldSpeakerGroups:
    def test_even_deal(self):
        recs = records_for_speakers([f"s{i}" for i in range(10)])
        folds = kfold_speaker_groups(recs, 5, seed=0)
        sizes = [sum(1 for v in folds.values() if v == f) for f in range(5)]
        assert sizes == [2, 2, 2, 2, 2]

    def test_speaker_recordings_stay_together(self):
        recs = records_for_speakers(["a", "a", "a", "b", "c", "d"])
        folds = kfold_speaker_groups(recs, 2, seed=1)
        # one fold index per speaker by construction of the mapping
        assert set(folds) == {"a", "b", "c", "d"}

    def test_deterministic(self):
        recs = records_for_speakers([f"s{i}" for i in range(13)])
        assert kfold_speaker_groups(recs, 4, seed=9) == kfold_speaker_groups(recs, 4, seed=9)

    def test_fold_sizes_differ_by_at_most_one(self):
        recs = records_for_speakers([f"s{i}" for i in range(13)])
        folds = kfold_speaker_groups(recs, 4, seed=5)
        sizes = [sum(1 for v in folds.values() if v == f) for f in range(4)]
        assert max(sizes) - min(sizes) <= 1

    def test_too_few_speakers(self):
        with pytest.raises(ValueError, match="at least"):
            kfold_speaker_groups(records_for_speakers(["a", "b"]), 3, seed=0)


class TestRecordingPrediction:
    def test_boundary_is_positive(self):
        score, label = recording_prediction([0.9, 0.1], MEAN, 0.5)
        assert score == pytest.approx(0.5) and label

    def test_max(self):
        score, label = recording_prediction([0.4, 0.4, 0.9], MAX, 0.5)
        assert score == 0.9 and label

    def test_mean_arithmetic(self):
        score, label = recording_prediction([0.4, 0.4, 0.9], MEAN, 0.5)
        assert score == pytest.approx(0.5666666666666667, rel=1e-12) and label

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            recording_prediction([], MEAN, 0.5)


class TestEvalProtocol:
    def test_validation(self):
        with pytest.raises(ValueError):
            EvalProtocol(kind="loo")
        with pytest.raises(ValueError):
            EvalProtocol(decision_threshold=1.0)
        with pytest.raises(ValueError):
            EvalProtocol(kind="kfold", k=1)
        with pytest.raises(ValueError):
            EvalProtocol(aggregation="first")

    def test_summary(self):
        assert EvalProtocol(kind="kfold", k=5).summary() == "kfold(5)"
        assert EvalProtocol(kind="holdout", undersample_majority=True).summary() == "holdout+undersample"

    def test_pooling_name(self):
        assert EvalProtocol(pooling=MAX).pooling_name() == "max"
        assert EvalProtocol(aggregation="middle").pooling_name() == "middle"
        with pytest.raises(ValueError):
            EvalProtocol().pooling_name()


class TestFoldSplits:
    def test_protocol_mismatch(self, planted_store):
        _, manifest = planted_store
        with pytest.raises(ValueError, match="does not match manifest"):
            list(fold_splits(manifest, EvalProtocol(kind="holdout", pooling=MEAN)))

    def test_k_mismatch(self, planted_store):
        _, manifest = planted_store
        with pytest.raises(ValueError, match="k="):
            list(fold_splits(manifest, EvalProtocol(kind="kfold", k=3, pooling=MEAN)))

    def test_partition(self, planted_store):
        _, manifest = planted_store
        seen = set()
        for fold, train, test in fold_splits(manifest, EvalProtocol(kind="kfold", k=5, pooling=MEAN)):
            train_ids = {r.recording_id for r in train}
            test_ids = {r.recording_id for r in test}
            assert not train_ids & test_ids
            assert not seen & test_ids
            seen |= test_ids
        assert seen == {r.recording_id for r in manifest.records}


class TestEvaluateConfig:
    def test_planted_signal_layer_is_separable(self, planted_store):
        store, manifest = planted_store
        proto = EvalProtocol(kind="kfold", k=5, pooling=MEAN, seed=0)
        row = evaluate_config(store, manifest, "target", 1, 10.0, proto)
        assert row.f1 == 1.0
        assert row.per_fold_f1 == [1.0] * 5
        assert row.tp + row.fn == sum(r.labels["target"] for r in manifest.records)
        assert len(row.per_fold_f1) == 5

    def test_noise_layer_near_chance(self, planted_store):
        store, manifest = planted_store
        proto = EvalProtocol(kind="kfold", k=5, pooling=MEAN, seed=0)
        row = evaluate_config(store, manifest, "target", 0, 10.0, proto)
        assert row.f1 < 0.95  # no planted signal in layer 0

    def test_f1_consistent_with_fold_counts(self, planted_store):
        store, manifest = planted_store
        proto = EvalProtocol(kind="kfold", k=5, pooling=MAX, seed=0)
        row = evaluate_config(store, manifest, "target", 0, 10.0, proto)
        assert row.f1 == pytest.approx(np.mean(row.per_fold_f1))
        assert row.tp + row.fp + row.fn + row.tn == row.n_test_recordings

    def test_middle_window_agrees_when_signal_everywhere(self, planted_store):
        store, manifest = planted_store
        pool_row = evaluate_config(
            store, manifest, "target", 1, 10.0,
            EvalProtocol(kind="kfold", k=5, pooling=MAX, seed=0),
        )
        middle_row = evaluate_config(
            store, manifest, "target", 1, 10.0,
            EvalProtocol(kind="kfold", k=5, aggregation="middle", seed=0),
        )
        assert middle_row.pooling == "middle"
        assert abs(middle_row.f1 - pool_row.f1) <= 0.05

    def test_cell_group_shares_fits(self, planted_store):
        store, manifest = planted_store
        proto = EvalProtocol(kind="kfold", k=5, seed=0)
        rows = evaluate_cell_group(store, manifest, "target", 1, 10.0, proto, [MEAN, MAX])
        assert rows[0].probe_key == rows[1].probe_key
        assert rows[0].n_train_windows == rows[1].n_train_windows
        single = evaluate_config(
            store, manifest, "target", 1, 10.0,
            EvalProtocol(kind="kfold", k=5, pooling=MAX, seed=0),
        )
        assert single.f1 == rows[1].f1 and single.per_fold_f1 == rows[1].per_fold_f1

    def test_unknown_label_rejected(self, planted_store):
        store, manifest = planted_store
        with pytest.raises(ValueError, match="unknown label"):
            evaluate_config(store, manifest, "nope", 0, 10.0, EvalProtocol(pooling=MEAN))

    def test_degenerate_fold_named(self, tmp_path):
        # fold 0 holds all positives, so training for fold 0 is single-class
        store, manifest = build_planted_store(
            tmp_path / "store", n_speakers=8, k=2, seed=5, positive_rate=0.5,
            duration_s=10.0, n_layers=1, signal_layer=0,
        )
        records = []
        for rec in manifest.records:
            records.append(
                RecordingRecord(
                    recording_id=rec.recording_id, speaker_id=rec.speaker_id,
                    duration_s=rec.duration_s, task=rec.task, labels=rec.labels,
                    fold=0 if rec.labels["target"] else 1,
                )
            )
        rigged = Manifest(
            label_definitions=manifest.label_definitions, records=tuple(records),
            protocol_kind="kfold", n_folds=2,
        )
        with pytest.raises(DegenerateFoldError, match="fold 0"):
            evaluate_config(
                store, rigged, "target", 0, 5.0,
                EvalProtocol(kind="kfold", k=2, pooling=MEAN, seed=0),
            )

    def test_undersample_changes_training_only_deterministically(self, planted_store):
        store, manifest = planted_store
        proto = EvalProtocol(kind="kfold", k=5, pooling=MEAN, seed=0, undersample_majority=True)
        row1 = evaluate_config(store, manifest, "target", 1, 10.0, proto)
        row2 = evaluate_config(store, manifest, "target", 1, 10.0, proto)
        assert row1.f1 == row2.f1
        assert row1.per_fold_f1 == row2.per_fold_f1
        assert row1.protocol == "kfold(5)+undersample"

    def test_recording_score_monotone_in_omega(self, planted_store):
        # end-to-end: window probabilities from a fitted probe, pooled score
        # must be nondecreasing along the omega ladder min -> mm -> max
        store, manifest = planted_store
        from layerprobe.probe import LogisticProbe
        from layerprobe.windowing import windows_for_recording

        train = [r for r in manifest.records if r.fold != 0]
        test = [r for r in manifest.records if r.fold == 0]
        X, y = [], []
        for rec in train:
            vectors = [w.vector for w in windows_for_recording(store.load(rec.recording_id, 1), 5.0)]
            X.extend(vectors)
            y.extend([rec.labels["target"]] * len(vectors))
        probe = LogisticProbe().fit(np.array(X), y)
        ladder = ["min", "mm:-100", "mm:-10", "mm:-1", "mm:-0.1", "mean",
                  "mm:0.1", "mm:1", "mm:10", "mm:100", "max"]
        for rec in test:
            vectors = np.array(
                [w.vector for w in windows_for_recording(store.load(rec.recording_id, 1), 5.0)]
            )
            probs = probe.positive_proba(vectors)
            scores = [recording_prediction(probs, s)[0] for s in ladder]
            assert all(a <= b + 1e-9 for a, b in zip(scores, scores[1:]))

    def test_holdout_f1_matches_confusion_counts(self, planted_store):
        from dataclasses import replace

        from layerprobe.evaluation import f1_from_counts

        store, manifest = planted_store
        # rebuild as a holdout manifest: folds 0-1 test, rest train
        records = tuple(
            replace(r, fold=None, split="test" if r.fold in (0, 1) else "train")
            for r in manifest.records
        )
        holdout = Manifest(
            label_definitions=manifest.label_definitions, records=records,
            protocol_kind="holdout",
        )
        row = evaluate_config(
            store, holdout, "target", 0, 10.0,
            EvalProtocol(kind="holdout", pooling=MEAN, seed=0),
        )
        assert len(row.per_fold_f1) == 1
        assert row.f1 == f1_from_counts(row.tp, row.fp, row.fn)
        assert row.protocol == "holdout"
