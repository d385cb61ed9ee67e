"""Linear probe: L2-regularized binary logistic regression, trained from scratch.

The objective is

    L(w, b) = (1/n) * sum_i [ -y_i log s(z_i) - (1 - y_i) log(1 - s(z_i)) ]
              + (l2_lambda / (2n)) * ||w||^2,        z_i = w . x_i + b

with the bias unregularized. Features are standardized inside ``fit``
(columnwise mean / population std, std floored at 1e-12) and the optimum is
found by a deterministic accelerated gradient method with backtracking line
search, so training is reproducible bit-for-bit.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .validation import as_binary_labels, as_float_matrix, check_finite

SCALE_FLOOR = 1e-12
BALANCED = "balanced"


class DegenerateTrainingError(ValueError):
    """Raised when a training set contains a single class."""


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, stable for large |z|."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class FeatureStandardizer(BaseEstimator, TransformerMixin):
    """Columnwise zero-mean, unit-variance scaling with a floored std.

    Uses the population standard deviation; constant columns get the
    1e-12 floor instead of a zero divisor. Fit it on training data only.
    """

    def fit(self, X, y=None):
        X = as_float_matrix(X)
        check_finite(X, "X")
        self.mean_ = X.mean(axis=0)
        self.scale_ = np.maximum(X.std(axis=0), SCALE_FLOOR)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        if not hasattr(self, "mean_"):
            raise NotFittedError("FeatureStandardizer is not fitted")
        X = as_float_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return (X - self.mean_) / self.scale_

    def to_dict(self) -> dict:
        return {"mean": self.mean_.tolist(), "scale": self.scale_.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureStandardizer":
        obj = cls()
        obj.mean_ = np.asarray(doc["mean"], dtype=np.float64)
        obj.scale_ = np.asarray(doc["scale"], dtype=np.float64)
        obj.n_features_in_ = obj.mean_.size
        return obj


def objective_and_gradient(w, b, X, y, l2_lambda, sample_weight=None):
    """Exact loss and gradient; gradient is laid out as (dL/dw..., dL/db).

    The log-likelihood terms are evaluated via logaddexp(0, z) - y*z, which
    is stable for any z.
    """
    X = as_float_matrix(X)
    w = np.asarray(w, dtype=np.float64).ravel()
    y = as_binary_labels(y).astype(np.float64)
    if X.shape[1] != w.size:
        raise ValueError(f"shape mismatch: X has {X.shape[1]} columns, w has {w.size}")
    if X.shape[0] != y.size:
        raise ValueError(f"shape mismatch: X has {X.shape[0]} rows, y has {y.size}")
    n = y.size
    z = X @ w + float(b)
    losses = np.logaddexp(0.0, z) - y * z
    if sample_weight is None:
        value = losses.mean()
        residual = (sigmoid(z) - y) / n
    else:
        sample_weight = np.asarray(sample_weight, dtype=np.float64)
        value = (sample_weight * losses).sum() / n
        residual = sample_weight * (sigmoid(z) - y) / n
    value += 0.5 * l2_lambda / n * (w @ w)
    grad = np.empty(w.size + 1)
    grad[:-1] = X.T @ residual + (l2_lambda / n) * w
    grad[-1] = residual.sum()
    return float(value), grad


def _minimize(fun_grad, x0, tol, max_iter):
    """Accelerated gradient descent with backtracking and monotone restarts.

    ``fun_grad(x) -> (f, g)``. Momentum follows the k/(k+3) schedule and is
    reset whenever the momentum step would increase the objective, so the
    sequence of accepted objective values is non-increasing. Terminates when
    the gradient infinity-norm drops to ``tol``.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fun_grad(x)
    if np.max(np.abs(g)) <= tol:
        return x, f, 0, True
    x_prev = x
    step = 1.0
    k = 0
    for it in range(1, max_iter + 1):
        beta = k / (k + 3.0)
        y = x + beta * (x - x_prev)
        fy, gy = fun_grad(y) if beta != 0.0 else (f, g)
        gy_sq = gy @ gy
        trial = step
        cand, fc, gc = y, fy, gy
        for _ in range(64):
            cand = y - trial * gy
            fc, gc = fun_grad(cand)
            if fc <= fy - 1e-4 * trial * gy_sq:
                break
            trial *= 0.5
        if fc > f:
            # Momentum overshot: plain descent step from the last accepted point.
            k = 0
            g_sq = g @ g
            trial = step
            for _ in range(64):
                cand = x - trial * g
                fc, gc = fun_grad(cand)
                if fc <= f - 1e-4 * trial * g_sq:
                    break
                trial *= 0.5
            if fc > f:
                # Gradient is at numerical noise level; stop without moving.
                return x, f, it, np.max(np.abs(g)) <= tol
        x_prev, x = x, cand
        f, g = fc, gc
        step = trial * 2.0
        k += 1
        if np.max(np.abs(g)) <= tol:
            return x, f, it, True
    return x, f, max_iter, False


class LogisticProbe(BaseEstimator, ClassifierMixin):
    """Binary logistic-regression probe with internal standardization.

    Parameters
    ----------
    l2_lambda : float, default 1.0
        Weight-decay strength; the bias is never regularized.
    tol : float, default 1e-6
        Convergence threshold on the gradient infinity-norm.
    max_iter : int, default 1000
        Cap on accepted optimizer iterations.
    class_weighting : None or "balanced", default None
        "balanced" reweights samples by n / (2 * class count).
    seed : int, default 0
        Recorded for provenance; the optimizer itself is deterministic.
    """

    def __init__(self, l2_lambda=1.0, tol=1e-6, max_iter=1000, class_weighting=None, seed=0):
        self.l2_lambda = l2_lambda
        self.tol = tol
        self.max_iter = max_iter
        self.class_weighting = class_weighting
        self.seed = seed

    def fit(self, X, y):
        X = as_float_matrix(X)
        check_finite(X, "X")
        y = as_binary_labels(y)
        if X.shape[0] != y.size:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.size} labels")
        n_pos = int(y.sum())
        if n_pos == 0 or n_pos == y.size:
            raise DegenerateTrainingError(
                f"degenerate training set: all {y.size} labels are "
                f"{'positive' if n_pos else 'negative'}"
            )
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be non-negative")
        if self.class_weighting not in (None, BALANCED):
            raise ValueError(f"unknown class_weighting {self.class_weighting!r}")

        self.standardizer_ = FeatureStandardizer().fit(X)
        Xs = self.standardizer_.transform(X)
        sample_weight = None
        if self.class_weighting == BALANCED:
            n = y.size
            counts = np.array([n - n_pos, n_pos], dtype=np.float64)
            sample_weight = n / (2.0 * counts[y])

        def fun_grad(wb):
            return objective_and_gradient(
                wb[:-1], wb[-1], Xs, y, self.l2_lambda, sample_weight
            )

        wb, final_obj, n_iter, converged = _minimize(
            fun_grad, np.zeros(Xs.shape[1] + 1), self.tol, self.max_iter
        )
        self.coef_ = wb[:-1]
        self.intercept_ = float(wb[-1])
        self.objective_ = final_obj
        self.converged_ = bool(converged)
        self.n_iter_ = int(n_iter)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError("LogisticProbe is not fitted")

    def decision_function(self, X):
        self._check_fitted()
        Xs = self.standardizer_.transform(as_float_matrix(X))
        return Xs @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        """Class probabilities, columns ordered (negative, positive)."""
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def positive_proba(self, X):
        """Positive-class probability as a flat vector."""
        return sigmoid(self.decision_function(X))

    def predict(self, X):
        return (self.positive_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        """JSON-ready snapshot of the fitted model, for caching."""
        self._check_fitted()
        return {
            "weights": self.coef_.tolist(),
            "bias": self.intercept_,
            "standardizer": self.standardizer_.to_dict(),
            "config": {
                "l2_lambda": self.l2_lambda,
                "tol": self.tol,
                "max_iter": self.max_iter,
                "class_weighting": self.class_weighting,
                "seed": self.seed,
            },
            "converged": self.converged_,
            "n_iterations": self.n_iter_,
            "objective": self.objective_,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LogisticProbe":
        model = cls(**doc["config"])
        model.coef_ = np.asarray(doc["weights"], dtype=np.float64)
        model.intercept_ = float(doc["bias"])
        model.standardizer_ = FeatureStandardizer.from_dict(doc["standardizer"])
        model.converged_ = bool(doc["converged"])
        model.n_iter_ = int(doc["n_iterations"])
        model.objective_ = float(doc["objective"])
        model.n_features_in_ = model.coef_.size
        model.classes_ = np.array([0, 1])
        return model
