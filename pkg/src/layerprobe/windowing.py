"""Sliding-window segmentation of frame embeddings.

Windows are half-open time intervals [i*hop, i*hop + window) laid out from
0 s; trailing audio shorter than one window is dropped. A recording shorter
than the window yields a single degenerate whole-recording window. Each
window embedding is the arithmetic mean of the frames whose start time
falls inside the interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding_io import EmbeddingSequence
from .validation import check_positive

# Absorbs float rounding in duration/hop arithmetic so exact fits like
# (4 - 0.5) / 0.25 do not lose a window.
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class WindowPlan:
    """Ordered half-open [start_s, end_s) intervals for one recording."""

    window_s: float
    hop_s: float
    intervals: tuple[tuple[float, float], ...]
    degenerate: bool = False

    def __len__(self) -> int:
        return len(self.intervals)


@dataclass(frozen=True)
class WindowEmbedding:
    """Mean frame embedding over one window."""

    start_s: float
    end_s: float
    vector: np.ndarray
    n_frames_used: int
    nearest_fallback: bool = False  # set when no frame start fell inside the interval


def plan_windows(duration_s: float, window_s: float, hop_s: float) -> WindowPlan:
    """Lay out [i*hop, i*hop + window) intervals covering ``duration_s``.

    When ``duration_s >= window_s`` the count is
    floor((duration_s - window_s) / hop_s) + 1; otherwise the plan is the
    single degenerate interval [0, duration_s).
    """
    duration_s = check_positive(duration_s, "duration_s")
    window_s = check_positive(window_s, "window_s")
    hop_s = check_positive(hop_s, "hop_s")
    if hop_s > window_s + _TIME_EPS:
        raise ValueError(f"hop_s ({hop_s}) must not exceed window_s ({window_s})")
    if duration_s + _TIME_EPS < window_s:
        return WindowPlan(window_s, hop_s, ((0.0, duration_s),), degenerate=True)
    count = int(np.floor((duration_s - window_s) / hop_s + _TIME_EPS)) + 1
    intervals = tuple((i * hop_s, i * hop_s + window_s) for i in range(count))
    return WindowPlan(window_s, hop_s, intervals)


def middle_window(plan: WindowPlan) -> tuple[float, float]:
    """Central interval of the plan; even counts take the earlier center."""
    if len(plan) == 0:
        raise ValueError("window plan is empty")
    return plan.intervals[(len(plan) - 1) // 2]


def middle_window_index(n_windows: int) -> int:
    if n_windows < 1:
        raise ValueError("n_windows must be >= 1")
    return (n_windows - 1) // 2


def window_embedding(seq: EmbeddingSequence, interval: tuple[float, float]) -> WindowEmbedding:
    """Mean of the frames f with start_s <= f / frame_hz < end_s.

    If the interval contains no frame start, the single nearest frame to the
    interval center is used and the result is flagged.
    """
    start_s, end_s = float(interval[0]), float(interval[1])
    if not (end_s > start_s):
        raise ValueError(f"empty interval [{start_s}, {end_s})")
    if end_s <= 0 or start_s >= seq.duration_s:
        raise ValueError(
            f"interval [{start_s}, {end_s}) does not overlap recording span [0, {seq.duration_s:.3f})"
        )
    lo = max(0, int(np.ceil(start_s * seq.frame_hz - _TIME_EPS)))
    hi = min(seq.n_frames, int(np.ceil(end_s * seq.frame_hz - _TIME_EPS)))
    if hi > lo:
        vector = seq.data[lo:hi].mean(axis=0, dtype=np.float64)
        return WindowEmbedding(start_s, end_s, vector, n_frames_used=hi - lo)
    center = 0.5 * (start_s + end_s)
    nearest = int(np.clip(round(center * seq.frame_hz), 0, seq.n_frames - 1))
    vector = seq.data[nearest].astype(np.float64)
    return WindowEmbedding(start_s, end_s, vector, n_frames_used=1, nearest_fallback=True)


def windows_for_recording(seq: EmbeddingSequence, window_s: float) -> list[WindowEmbedding]:
    """Plan windows with hop = window / 2 and embed each, in time order."""
    plan = plan_windows(seq.duration_s, window_s, window_s / 2.0)
    return [window_embedding(seq, interval) for interval in plan.intervals]
