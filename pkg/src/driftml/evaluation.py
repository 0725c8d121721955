"""Metrics, offline validation schemes and prequential (test-then-train) evaluation."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .drift import DriftDetector, Status
from .errors import DriftMLError
from .stream import Dataset, Instance

# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class ConfusionCounts:
    """One-vs-rest counts per class (arrays indexed by class id)."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    @property
    def n(self) -> int:
        return int(self.tp[0] + self.fp[0] + self.fn[0] + self.tn[0])

    @property
    def n_classes(self) -> int:
        return len(self.tp)

    @classmethod
    def from_predictions(cls, y_true, y_pred, n_classes: int | None = None) -> "ConfusionCounts":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.shape != y_pred.shape:
            raise ValueError("y_true and y_pred must have equal length")
        if n_classes is None:
            n_classes = int(max(y_true.max(initial=0), y_pred.max(initial=0)) + 1)
        M = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(M, (y_true, y_pred), 1)
        tp = np.diag(M).copy()
        fp = M.sum(axis=0) - tp
        fn = M.sum(axis=1) - tp
        tn = M.sum() - tp - fp - fn
        return cls(tp, fp, fn, tn)

    @classmethod
    def binary(cls, tp: int, fp: int, fn: int, tn: int) -> "ConfusionCounts":
        """Counts for a binary problem given from the positive class (id 1)."""
        return cls(np.array([tn, tp]), np.array([fn, fp]), np.array([fp, fn]), np.array([tp, tn]))


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    precision_undefined: bool = False
    recall_undefined: bool = False


@dataclass
class ClassificationReport:
    accuracy: float
    per_class: list[ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float

    def positive(self, cls: int = 1) -> ClassMetrics:
        return self.per_class[cls]

    def summary(self, positive: int | None = None) -> dict:
        """Flat accuracy/precision/recall/f1 dict (binary positive class or macro)."""
        if positive is not None and positive < len(self.per_class):
            m = self.per_class[positive]
            return {"accuracy": self.accuracy, "precision": m.precision, "recall": m.recall, "f1": m.f1}
        return {"accuracy": self.accuracy, "precision": self.macro_precision,
                "recall": self.macro_recall, "f1": self.macro_f1}


def _ratio(num: float, den: float) -> tuple[float, bool]:
    return (num / den, False) if den > 0 else (0.0, True)


def classification_metrics(c: ConfusionCounts) -> ClassificationReport:
    """Accuracy plus per-class and macro precision/recall/F1.

    Zero denominators yield 0 with the matching ``*_undefined`` flag set.
    For binary problems the per-class accuracy (TP+TN)/n coincides with the
    overall accuracy.
    """
    n = c.n
    if n < 1:
        raise ValueError("confusion counts are empty")
    accuracy = float(c.tp.sum()) / n
    per = []
    for k in range(c.n_classes):
        p, pu = _ratio(c.tp[k], c.tp[k] + c.fp[k])
        r, ru = _ratio(c.tp[k], c.tp[k] + c.fn[k])
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        per.append(ClassMetrics(float(p), float(r), float(f1), pu, ru))
    return ClassificationReport(
        accuracy,
        per,
        float(np.mean([m.precision for m in per])),
        float(np.mean([m.recall for m in per])),
        float(np.mean([m.f1 for m in per])),
    )


def binary_accuracy(tp, fp, fn, tn) -> float:
    return (tp + tn) / (tp + tn + fp + fn)


@dataclass(frozen=True)
class RegressionMetrics:
    mse: float
    rmse: float
    mae: float


def regression_metrics(y, y_hat) -> RegressionMetrics:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ValueError("length mismatch")
    if y.size < 1:
        raise ValueError("need at least one value")
    r = y - y_hat
    mse = float(np.mean(r * r))
    return RegressionMetrics(mse, math.sqrt(mse), float(np.mean(np.abs(r))))


# ---------------------------------------------------------------------------
# Offline validation


def kfold_indices(n: int, k: int, seed: int = 0, y=None, stratified: bool = False) -> list[np.ndarray]:
    """Validation index sets of a (stratified) k-fold split; sizes differ by at most one."""
    if k < 2 or k > n:
        raise ValueError(f"k must lie in [2, n={n}]")
    rng = np.random.default_rng(seed)
    if stratified and y is not None:
        y = np.asarray(y)
        counts = np.bincount(y)
        if counts[counts > 0].min() < k:
            warnings.warn("a class has fewer than k samples; falling back to unstratified folds")
            stratified = False
    if not stratified or y is None:
        perm = rng.permutation(n)
        return [np.sort(f) for f in np.array_split(perm, k)]
    # deal each class's shuffled rows round-robin, continuing where the last class stopped
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(y):
        rows = rng.permutation(np.flatnonzero(y == c))
        for i, r in enumerate(rows):
            folds[(offset + i) % k].append(int(r))
        offset = (offset + len(rows)) % k
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def default_scoring(model, val: Dataset) -> dict:
    pred = model.predict_many(val.X)
    rep = classification_metrics(ConfusionCounts.from_predictions(val.y, pred, val.schema.n_classes))
    pos = 1 if val.schema.n_classes == 2 else None
    return rep.summary(pos)


@dataclass
class CVResult:
    folds: list[dict]
    fit_seconds: list[float] = field(default_factory=list)

    def mean(self, metric: str) -> float:
        return float(np.mean([f[metric] for f in self.folds]))

    def std(self, metric: str) -> float:
        return float(np.std([f[metric] for f in self.folds]))

    def summary(self) -> dict:
        keys = self.folds[0].keys() if self.folds else []
        return {k: {"mean": self.mean(k), "std": self.std(k)} for k in keys}


def kfold_cv(model_factory: Callable, d: Dataset, k: int = 5, seed: int = 0,
             stratified: bool = True, scoring: Callable = default_scoring) -> CVResult:
    """Fit a fresh model per fold on the other folds; score on the held-out fold."""
    folds = kfold_indices(len(d), k, seed, d.y, stratified)
    all_idx = np.arange(len(d))
    results, secs = [], []
    for val_idx in folds:
        train_idx = np.setdiff1d(all_idx, val_idx)
        model = model_factory()
        t0 = time.perf_counter()
        model.fit(d.subset(train_idx))
        secs.append(time.perf_counter() - t0)
        results.append(scoring(model, d.subset(val_idx)))
    return CVResult(results, secs)


def rolling_splits(n: int, n_splits: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Forward-chaining splits: train on a growing prefix, validate on the next block."""
    if n_splits < 1 or n < n_splits + 1:
        raise ValueError(f"n_splits={n_splits} too large for n={n}")
    block = n // (n_splits + 1)
    out = []
    for i in range(n_splits):
        end = (i + 1) * block
        stop = n if i == n_splits - 1 else end + block
        out.append((np.arange(0, end), np.arange(end, stop)))
    return out


def rolling_cv(model_factory: Callable, d: Dataset, n_splits: int = 5,
               scoring: Callable = default_scoring) -> list[dict]:
    results = []
    for train_idx, val_idx in rolling_splits(len(d), n_splits):
        model = model_factory()
        model.fit(d.subset(train_idx))
        results.append(scoring(model, d.subset(val_idx)))
    return results


def holdout_split(n: int, test_fraction: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    cut = n - int(round(test_fraction * n))
    return np.sort(perm[:cut]), np.sort(perm[cut:])


# ---------------------------------------------------------------------------
# Prequential evaluation


@dataclass
class DriftEvent:
    index: int
    detector: str
    status: str

    def to_dict(self) -> dict:
        return {"index": self.index, "detector": self.detector, "status": self.status}


@dataclass
class PrequentialTrace:
    predicted: list[int] = field(default_factory=list)
    actual: list[int] = field(default_factory=list)
    cumulative_loss: list[float] = field(default_factory=list)
    cumulative_accuracy: list[float] = field(default_factory=list)
    events: list[DriftEvent] = field(default_factory=list)
    learn_seconds: float = 0.0
    predict_seconds: float = 0.0
    n_classes: int = 2

    def __len__(self):
        return len(self.predicted)

    @property
    def loss(self) -> float:
        return self.cumulative_loss[-1] if self.cumulative_loss else 0.0

    @property
    def accuracy(self) -> float:
        return self.cumulative_accuracy[-1] if self.cumulative_accuracy else 0.0

    def report(self, start: int = 0, stop: int | None = None) -> ClassificationReport:
        cc = ConfusionCounts.from_predictions(self.actual[start:stop], self.predicted[start:stop],
                                              self.n_classes)
        return classification_metrics(cc)

    def summary(self, positive: int | None = 1) -> dict:
        if not self.predicted:
            return {"n": 0}
        pos = positive if self.n_classes == 2 else None
        out = self.report().summary(pos)
        out["n"] = len(self)
        out["cumulative_loss"] = self.loss
        return out

    def timeline_rows(self):
        marks: dict[int, list[str]] = {}
        for e in self.events:
            marks.setdefault(e.index, []).append(f"{e.detector}:{e.status}")
        for i, acc in enumerate(self.cumulative_accuracy):
            yield i, acc, ";".join(marks.get(i, []))


def zero_one_loss(y, y_hat) -> float:
    return float(y != y_hat)


def prequential_eval(stream: Iterable[Instance], model, loss: Callable = zero_one_loss,
                     detectors: dict[str, DriftDetector] | None = None, detector_input="loss",
                     on_drift: str = "none", hook: Callable | None = None,
                     max_instances: int | None = None, start_index: int = 0) -> PrequentialTrace:
    """Strict test-then-train over ``stream``.

    Each instance is scored by ``model`` and only then learned. ``detectors``
    receive the 0/1 loss (``detector_input="loss"``) or the feature at index
    ``detector_input``. With ``on_drift="reset"`` a detector drift resets the
    model. Internal ensemble events exposed via a ``model.events`` list are
    merged into the trace. ``hook(stage, index)`` is invoked around each
    predict/learn call for instrumentation.
    """
    trace = PrequentialTrace(n_classes=model.n_classes)
    detectors = detectors or {}
    E = 0.0
    correct = 0
    model_events = getattr(model, "events", None)
    seen_events = len(model_events) if model_events is not None else 0
    for step, x in enumerate(stream):
        if max_instances is not None and step >= max_instances:
            break
        i = start_index + step
        if hook:
            hook("predict", i)
        t0 = time.perf_counter()
        y_hat = model.predict_one(x)
        t1 = time.perf_counter()
        l = loss(x.label, y_hat)
        E += l
        correct += int(y_hat == x.label)
        trace.predicted.append(int(y_hat))
        trace.actual.append(int(x.label))
        trace.cumulative_loss.append(E)
        trace.cumulative_accuracy.append(correct / (step + 1))
        for name, det in detectors.items():
            value = int(y_hat != x.label) if detector_input == "loss" else x.values[detector_input]
            st = det.update(value)
            if st is not Status.STABLE:
                trace.events.append(DriftEvent(i, name, st.value))
                if st is Status.DRIFT and on_drift == "reset":
                    model.reset()
        if hook:
            hook("learn", i)
        t2 = time.perf_counter()
        model.learn_one(x)
        t3 = time.perf_counter()
        trace.predict_seconds += t1 - t0
        trace.learn_seconds += t3 - t2
        model_events = getattr(model, "events", None)
        if model_events is not None:
            if len(model_events) < seen_events:  # model was reset
                seen_events = 0
            for ev in model_events[seen_events:]:
                if ev.get("kind") == "drift":
                    name = f"member{ev.get('member', '')}"
                    if "base" in ev:
                        name = f"base{ev['base']}.{name}"
                    trace.events.append(DriftEvent(i, name, Status.DRIFT.value))
            seen_events = len(model_events)
    return trace
