"""Score pooling: min, mean, max, and the mellowmax interpolation.

mellowmax(x, omega) = (1/omega) * log( (1/n) * sum_i exp(omega * x_i) )

interpolates continuously between min (omega -> -inf), mean (omega -> 0)
and max (omega -> +inf). omega = 0 itself is not a valid mellowmax
parameter; use the "mean" strategy for the analytic limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .validation import as_float_vector, check_finite

MIN = "min"
MEAN = "mean"
MAX = "max"
MELLOWMAX = "mellowmax"

# Below this value of |omega| * spread the shifted exponentials are all
# rounded to 1.0 and the direct formula returns max instead of ~mean; a
# second-order expansion around the mean is exact to O((omega*spread)^2).
_EXPANSION_CUTOFF = 1e-8


@dataclass(frozen=True)
class PoolingStrategy:
    """One of min / mean / max / mellowmax(omega).

    Serialized form: ``"min" | "mean" | "max" | "mm:<omega>"``.
    """

    kind: str
    omega: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in (MIN, MEAN, MAX, MELLOWMAX):
            raise ValueError(f"unknown pooling kind {self.kind!r}")
        if self.kind == MELLOWMAX:
            if self.omega is None or not math.isfinite(self.omega) or self.omega == 0:
                raise ValueError(
                    f"mellowmax omega must be finite and nonzero, got {self.omega!r}; "
                    "use the 'mean' strategy for the omega -> 0 limit"
                )
        elif self.omega is not None:
            raise ValueError(f"pooling {self.kind!r} takes no omega")

    @classmethod
    def parse(cls, text: str) -> "PoolingStrategy":
        text = text.strip()
        if text in (MIN, MEAN, MAX):
            return cls(kind=text)
        if text.startswith("mm:"):
            try:
                return cls(kind=MELLOWMAX, omega=float(text[3:]))
            except ValueError as exc:
                raise ValueError(f"bad mellowmax serialization {text!r}") from exc
        raise ValueError(f"unknown pooling strategy {text!r}")

    def serialize(self) -> str:
        if self.kind != MELLOWMAX:
            return self.kind
        omega = self.omega
        if omega == int(omega) and abs(omega) < 1e16:
            return f"mm:{int(omega)}"
        return f"mm:{omega!r}"


def mellowmax(x, omega: float) -> float:
    """Numerically stable mellowmax of a non-empty vector.

    Computed by shifting: with m = max(x) for omega > 0 (min(x) otherwise),
    mm(x) = m + (1/omega) * log(mean(exp(omega * (x - m)))), so all
    exponent arguments are <= 0 and no overflow can occur. The result is
    clamped into [min(x), max(x)] to guard the bound invariant against the
    last rounding step at extreme omega.
    """
    x = as_float_vector(x, "x")
    check_finite(x, "x")
    omega = float(omega)
    if not math.isfinite(omega) or omega == 0.0:
        raise ValueError(f"omega must be finite and nonzero, got {omega}")
    lo = float(x.min())
    hi = float(x.max())
    if hi == lo:
        return hi
    if abs(omega) * (hi - lo) < _EXPANSION_CUTOFF:
        approx = float(x.mean()) + 0.5 * omega * float(x.var())
        return float(min(max(approx, lo), hi))
    m = hi if omega > 0 else lo
    with np.errstate(under="ignore"):
        shifted = np.exp(omega * (x - m))
        value = m + math.log(shifted.mean()) / omega
    return float(min(max(value, lo), hi))


def pool(scores, strategy: PoolingStrategy | str) -> float:
    """Reduce per-window scores in [0, 1] to one recording-level score."""
    if isinstance(strategy, str):
        strategy = PoolingStrategy.parse(strategy)
    scores = as_float_vector(scores, "scores")
    check_finite(scores, "scores")
    if scores.min() < 0.0 or scores.max() > 1.0:
        raise ValueError("scores must lie in [0, 1]")
    if strategy.kind == MIN:
        return float(scores.min())
    if strategy.kind == MAX:
        return float(scores.max())
    if strategy.kind == MEAN:
        return float(scores.mean())
    return mellowmax(scores, strategy.omega)
