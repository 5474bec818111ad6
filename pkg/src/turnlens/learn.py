"""Linear SVM training, isotonic calibration, UAR evaluation, C search.

The SVM solves the L1-hinge primal

    (1/2) ||w||^2 + C * sum_i cw(y_i) * hinge(y_i (w . x_i + b))

by dual coordinate descent with the bias folded in as a constant augmented
feature (so b is regularized too, the usual trick). Training is exactly
reproducible: the coordinate order is drawn from a seeded generator and no
other randomness exists.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError
from .features import StandardizerParams

#: Powers of four from 2^-15 to 2^5.
DEFAULT_C_GRID: tuple[float, ...] = tuple(2.0**k for k in range(-15, 6, 2))

CONVERGENCE_TOL = 1e-4
MAX_EPOCHS = 10_000


@dataclass(eq=False)
class LinearModel:
    """A trained linear decision function sign(w . x + b)."""

    weights: np.ndarray
    bias: float
    C: float
    positive_label: str = "+1"
    negative_label: str = "-1"
    dual_objectives: tuple[float, ...] = ()
    converged: bool = True

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.C <= 0:
            raise DataError(f"C must be positive, got {self.C}")


def _check_training_input(x: np.ndarray, y: np.ndarray) -> None:
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError("training needs a 2-D matrix with at least two rows")
    if y.shape != (x.shape[0],):
        raise DataError("labels must be one per row")
    if not np.isfinite(x).all():
        raise DataError("non-finite features in training matrix")
    present = set(np.unique(y).tolist())
    if not present <= {-1, 1}:
        raise DataError(f"labels must be +/-1, got {sorted(present)}")
    if len(present) != 2:
        raise DataError("single-class input: training needs both classes")


def train_svm(
    x: np.ndarray,
    y: Sequence[int] | np.ndarray,
    c: float,
    class_weights: bool = False,
    seed: int = 0,
    tol: float = CONVERGENCE_TOL,
    max_epochs: int = MAX_EPOCHS,
) -> LinearModel:
    """Train a linear SVM by dual coordinate descent.

    Args:
        x: standardized feature matrix, one row per sample.
        y: labels in {-1, +1}; both classes must appear.
        c: complexity parameter (> 0).
        class_weights: when true, weight each class by inverse frequency
            (n / (2 * n_class)); default is uniform weights.
        seed: seeds the coordinate-order generator; same seed and data give
            bit-identical weights.

    Returns:
        LinearModel carrying the weights, bias, and the per-epoch dual
        objective curve (nondecreasing by construction).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if c <= 0:
        raise DataError(f"C must be positive, got {c}")
    _check_training_input(x, y)
    n, d = x.shape
    xa = np.hstack([x, np.ones((n, 1))])
    yv = y.astype(np.float64)

    if class_weights:
        n_pos = int((y == 1).sum())
        n_neg = n - n_pos
        cw = np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * n_neg))
    else:
        cw = np.ones(n)
    upper = c * cw

    q = np.einsum("ij,ij->i", xa, xa)
    alpha = np.zeros(n)
    w = np.zeros(d + 1)
    rng = np.random.default_rng(seed)
    duals: list[float] = []
    converged = False

    for _ in range(max_epochs):
        perm = rng.permutation(n)
        max_violation = 0.0
        for i in perm:
            g = yv[i] * float(w @ xa[i]) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= upper[i]:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                violation = abs(pg)
                if violation > max_violation:
                    max_violation = violation
                new_a = min(max(a - g / q[i], 0.0), upper[i])
                if new_a != a:
                    w += (new_a - a) * yv[i] * xa[i]
                    alpha[i] = new_a
        duals.append(float(alpha.sum() - 0.5 * float(w @ w)))
        if max_violation < tol:
            converged = True
            break

    return LinearModel(
        weights=w[:d].copy(),
        bias=float(w[d]),
        C=float(c),
        dual_objectives=tuple(duals),
        converged=converged,
    )


def decision_scores(model: LinearModel, x: np.ndarray) -> np.ndarray:
    """Raw scores w . x + b; the sign is the predicted class."""
    x = np.asarray(x, dtype=np.float64)
    return x @ model.weights + model.bias


def predict_signs(model: LinearModel, x: np.ndarray) -> np.ndarray:
    scores = decision_scores(model, x)
    return np.where(scores > 0, 1, -1)


def duality_gap(model: LinearModel, x: np.ndarray, y: np.ndarray, class_weights: bool = False) -> float:
    """Primal minus dual objective at the trained point (>= 0, small at optimum)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if class_weights:
        n_pos = float((y == 1).sum())
        cw = np.where(y == 1, n / (2.0 * n_pos), n / (2.0 * (n - n_pos)))
    else:
        cw = np.ones(n)
    margins = y * (x @ model.weights + model.bias)
    hinge = np.maximum(0.0, 1.0 - margins)
    reg = 0.5 * (model.weights @ model.weights + model.bias**2)
    primal = reg + model.C * float((cw * hinge).sum())
    dual = model.dual_objectives[-1] if model.dual_objectives else -reg
    return float(primal - dual)


@dataclass(frozen=True, eq=False)
class IsotonicCalibrator:
    """A nondecreasing step function from raw score to probability."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "breakpoints", np.asarray(self.breakpoints, dtype=np.float64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.breakpoints.shape != self.values.shape or self.breakpoints.ndim != 1:
            raise DataError("calibrator breakpoints/values must be 1-D and equally sized")
        if self.breakpoints.size == 0:
            raise DataError("calibrator must have at least one breakpoint")
        if (np.diff(self.breakpoints) <= 0).any():
            raise DataError("calibrator breakpoints must be strictly ascending")
        if (np.diff(self.values) < -1e-12).any():
            raise DataError("calibrator values must be nondecreasing")

    def to_dict(self) -> dict:
        return {
            "breakpoints": [float(v) for v in self.breakpoints],
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "IsotonicCalibrator":
        return cls(breakpoints=np.asarray(obj["breakpoints"], float), values=np.asarray(obj["values"], float))


def fit_isotonic(scores: Sequence[float] | np.ndarray, labels: Sequence[int] | np.ndarray) -> IsotonicCalibrator:
    """Least-squares nondecreasing fit of binary labels ordered by score.

    Samples are sorted by score; exact score ties are pooled first, then
    pool-adjacent-violators merges any decreasing neighbors. An input with a
    single class is allowed and yields a constant calibrator.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.ndim != 1 or s.shape != y.shape:
        raise DataError("scores and labels must be 1-D and equally long")
    if s.size < 2:
        raise DataError("calibration needs at least two samples")
    if not np.isfinite(s).all():
        raise DataError("scores must be finite")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataError("labels must be 0 or 1")

    order = np.argsort(s, kind="stable")
    s, y = s[order], y[order]
    uniq, starts, counts = np.unique(s, return_index=True, return_counts=True)
    sums = np.add.reduceat(y, starts)

    # PAVA over (value, weight, span) blocks
    vals: list[float] = []
    wts: list[float] = []
    spans: list[int] = []
    for total, weight in zip(sums, counts):
        vals.append(total / weight)
        wts.append(float(weight))
        spans.append(1)
        while len(vals) >= 2 and vals[-2] > vals[-1]:
            v = (vals[-2] * wts[-2] + vals[-1] * wts[-1]) / (wts[-2] + wts[-1])
            wts[-2] += wts[-1]
            spans[-2] += spans[-1]
            vals[-2] = v
            del vals[-1], wts[-1], spans[-1]

    fitted = np.repeat(vals, spans)
    return IsotonicCalibrator(breakpoints=uniq, values=fitted)


def calibrate(cal: IsotonicCalibrator, score: float | np.ndarray) -> float | np.ndarray:
    """Evaluate the step function; clamps below the first/above the last breakpoint."""
    idx = np.searchsorted(cal.breakpoints, score, side="right") - 1
    idx = np.clip(idx, 0, len(cal.values) - 1)
    out = cal.values[idx]
    return float(out) if np.isscalar(score) else out


@dataclass(frozen=True, eq=False)
class EvalResult:
    """Confusion matrix (rows true, cols predicted), recalls, and UAR."""

    classes: tuple
    confusion: np.ndarray
    per_class_recall: dict
    uar: float


def evaluate(y_true: Sequence, y_pred: Sequence) -> EvalResult:
    """Confusion matrix and unweighted average recall."""
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred):
        raise DataError("y_true and y_pred must have the same length")
    if not y_true:
        raise DataError("cannot evaluate an empty class: no samples")
    classes = tuple(sorted(set(y_true) | set(y_pred)))
    index = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[index[t], index[p]] += 1
    recalls = {}
    for c in classes:
        row = confusion[index[c]]
        total = int(row.sum())
        if total > 0:
            recalls[c] = float(row[index[c]] / total)
    return EvalResult(
        classes=classes,
        confusion=confusion,
        per_class_recall=recalls,
        uar=float(np.mean(list(recalls.values()))),
    )


def uar(y_true: Sequence, y_pred: Sequence) -> float:
    """Unweighted mean of per-class recalls over classes present in y_true."""
    return evaluate(y_true, y_pred).uar


class GridSearchResult(NamedTuple):
    c: float
    model: LinearModel
    uar: float


def grid_search_C(
    train: tuple[np.ndarray, np.ndarray],
    devel: tuple[np.ndarray, np.ndarray],
    grid: Sequence[float] = DEFAULT_C_GRID,
    class_weights: bool = False,
    seed: int = 0,
) -> GridSearchResult:
    """Train at each C, evaluate UAR on devel, return the argmax.

    Ties break toward the smallest C (the grid is scanned in ascending
    order and only strict improvements replace the incumbent).
    """
    if not grid:
        raise DataError("C grid must be non-empty")
    x_train, y_train = train
    x_devel, y_devel = devel
    best: GridSearchResult | None = None
    for c in sorted(grid):
        model = train_svm(x_train, y_train, c, class_weights=class_weights, seed=seed)
        score = uar(list(y_devel), list(predict_signs(model, x_devel)))
        if best is None or score > best.uar:
            best = GridSearchResult(c=float(c), model=model, uar=score)
    assert best is not None
    return best


def stratified_folds(y: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Deterministic stratified fold ids (round-robin within each class)."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    folds = np.zeros(len(y), dtype=np.int64)
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        idx = idx[rng.permutation(len(idx))]
        folds[idx] = np.arange(len(idx)) % n_folds
    return folds


def cross_val_calibrator(
    x: np.ndarray,
    y: np.ndarray,
    c: float,
    class_weights: bool = False,
    seed: int = 0,
    n_folds: int = 5,
) -> IsotonicCalibrator:
    """Isotonic calibrator fitted on pooled out-of-fold training scores.

    Stratified n-fold cross-validation on the training data produces one
    held-out score per sample; a single calibrator is fitted on the pooled
    (score, label) pairs. Development data never enters calibration.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    min_class = min(int((y == 1).sum()), int((y == -1).sum()))
    folds_eff = min(n_folds, min_class)
    if folds_eff < 2:
        # too few samples per class to hold anything out; fall back to in-sample scores
        model = train_svm(x, y, c, class_weights=class_weights, seed=seed)
        scores = decision_scores(model, x)
        return fit_isotonic(scores, (y + 1) // 2)
    folds = stratified_folds(y, folds_eff, seed)
    oof = np.zeros(len(y), dtype=np.float64)
    for k in range(folds_eff):
        held = folds == k
        model = train_svm(x[~held], y[~held], c, class_weights=class_weights, seed=seed)
        oof[held] = decision_scores(model, x[held])
    return fit_isotonic(oof, (y + 1) // 2)


@dataclass(eq=False)
class TrainedModel:
    """A deployable bundle: weights, standardizer, calibrator, label map."""

    weights: np.ndarray
    bias: float
    C: float
    standardizer: StandardizerParams
    calibrator: IsotonicCalibrator
    positive_label: str

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "C": float(self.C),
            "standardizer": self.standardizer.to_dict(),
            "calibrator": self.calibrator.to_dict(),
            "positive_label": self.positive_label,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainedModel":
        try:
            return cls(
                weights=np.asarray(obj["weights"], float),
                bias=float(obj["bias"]),
                C=float(obj["C"]),
                standardizer=StandardizerParams.from_dict(obj["standardizer"]),
                calibrator=IsotonicCalibrator.from_dict(obj["calibrator"]),
                positive_label=str(obj["positive_label"]),
            )
        except KeyError as exc:
            raise DataError(f"model document missing field {exc.args[0]!r}") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TrainedModel":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"model file {path}: malformed JSON ({exc})") from exc
        return cls.from_dict(obj)

    def raw_scores(self, values: np.ndarray) -> np.ndarray:
        """Scores for unstandardized feature rows."""
        x = (np.asarray(values, dtype=np.float64) - self.standardizer.mean) / self.standardizer.scale
        return x @ self.weights + self.bias

    def predict_proba(self, values: np.ndarray) -> np.ndarray:
        """Calibrated probability of the positive label."""
        return np.asarray(calibrate(self.calibrator, self.raw_scores(values)))
