import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import numeric_dataset, two_concept_spec
from driftml.drift import DDM
from driftml.evaluation import (ConfusionCounts, binary_accuracy, classification_metrics, holdout_split,
                                kfold_cv, kfold_indices, prequential_eval, regression_metrics,
                                rolling_cv, rolling_splits)
from driftml.offline import NaiveBayes, cart_fit
from driftml.online import FrozenClassifier, HoeffdingTree, OnlineClassifier
from driftml.stream import Instance, generate_stream, stream_to_dataset


def test_f1_from_counts():
    rep = classification_metrics(ConfusionCounts.binary(tp=2, fp=1, fn=1, tn=6))
    pos = rep.positive(1)
    assert pos.precision == pytest.approx(2 / 3, abs=1e-12)
    assert pos.recall == pytest.approx(2 / 3, abs=1e-12)
    assert pos.f1 == pytest.approx(4 / 6, abs=1e-12)
    assert rep.accuracy == pytest.approx(8 / 10, abs=1e-12)
    assert binary_accuracy(2, 1, 1, 6) == pytest.approx(0.8, abs=1e-12)


def test_perfect_predictions():
    y = [0, 1, 2, 1, 0]
    rep = classification_metrics(ConfusionCounts.from_predictions(y, y))
    assert rep.accuracy == 1.0
    assert rep.macro_precision == rep.macro_recall == rep.macro_f1 == 1.0


def test_no_positives_flagged():
    rep = classification_metrics(ConfusionCounts.binary(tp=0, fp=0, fn=0, tn=5))
    pos = rep.positive(1)
    assert rep.accuracy == 1.0
    assert pos.precision == 0.0 and pos.precision_undefined
    assert pos.recall == 0.0 and pos.recall_undefined


@settings(max_examples=60, deadline=None)
@given(pairs=st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=60))
def test_metric_identities(pairs):
    y, yh = zip(*pairs)
    c = ConfusionCounts.from_predictions(y, yh, 4)
    rep = classification_metrics(c)
    n = len(pairs)
    assert np.all(c.tp + c.fp + c.fn + c.tn == n)
    for k in range(4):
        if c.tp[k] + c.fn[k]:
            assert rep.per_class[k].recall == c.tp[k] / (c.tp[k] + c.fn[k])
    f1s = [m.f1 for m in rep.per_class]
    assert min(f1s) - 1e-12 <= rep.macro_f1 <= max(f1s) + 1e-12


def test_regression_examples():
    y = np.array([1.0, 2.0, 3.0])
    assert regression_metrics(y, y) == regression_metrics(y, y).__class__(0.0, 0.0, 0.0)
    m = regression_metrics(y, y + 2)
    assert (m.mae, m.mse, m.rmse) == (2.0, 4.0, 2.0)
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=10), rng.normal(size=10)
    m = regression_metrics(a, b)
    mse = sum((ai - bi) ** 2 for ai, bi in zip(a, b)) / 10
    mae = sum(abs(ai - bi) for ai, bi in zip(a, b)) / 10
    assert abs(m.mse - mse) < 1e-12 and abs(m.mae - mae) < 1e-12
    assert abs(m.rmse - math.sqrt(mse)) < 1e-12
    with pytest.raises(ValueError):
        regression_metrics([1, 2], [1])


@settings(max_examples=60, deadline=None)
@given(v=st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=30))
def test_regression_invariants(v):
    y, yh = map(np.array, zip(*v))
    m = regression_metrics(y, yh)
    assert m.rmse ** 2 == pytest.approx(m.mse, rel=1e-12, abs=1e-12)
    assert m.mae <= m.rmse + 1e-9


def test_leave_one_out_folds():
    folds = kfold_indices(6, 6, seed=0)
    assert sorted(len(f) for f in folds) == [1] * 6


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 80), data=st.data())
def test_folds_partition(n, data):
    k = data.draw(st.integers(2, n))
    seed = data.draw(st.integers(0, 1000))
    folds = kfold_indices(n, k, seed)
    allidx = np.concatenate(folds)
    assert sorted(allidx.tolist()) == list(range(n))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    assert all(np.array_equal(a, b) for a, b in zip(folds, kfold_indices(n, k, seed)))


@settings(max_examples=40, deadline=None)
@given(counts=st.lists(st.integers(5, 30), min_size=2, max_size=4), k=st.integers(2, 5), seed=st.integers(0, 99))
def test_stratified_proportions(counts, k, seed):
    y = np.repeat(np.arange(len(counts)), counts)
    folds = kfold_indices(len(y), k, seed, y, stratified=True)
    for c, total in enumerate(counts):
        per_fold = [int(np.sum(y[f] == c)) for f in folds]
        assert max(per_fold) - min(per_fold) <= 1
        assert sum(per_fold) == total


def test_stratified_fallback_warns():
    y = np.array([0] * 10 + [1])
    with pytest.warns(UserWarning):
        kfold_indices(11, 3, 0, y, stratified=True)


class Memorizer:
    """Looks up training rows; unseen rows get the training majority."""

    def fit(self, d):
        self.table = {tuple(x): int(c) for x, c in zip(d.X, d.y)}
        self.majority = int(np.argmax(np.bincount(d.y, minlength=2)))
        return self

    def predict_many(self, X):
        return np.array([self.table.get(tuple(x), self.majority) for x in X])


def test_memorizer_cv_enumeration():
    X = np.arange(8, dtype=float)[:, None]
    y = np.array([0, 0, 0, 1, 1, 0, 1, 0])
    d = numeric_dataset(X, y)
    cv = kfold_cv(Memorizer, d, k=4, seed=3, stratified=False)
    expected = []
    for val in kfold_indices(8, 4, 3):
        train = np.setdiff1d(np.arange(8), val)
        counts = np.bincount(y[train], minlength=2)
        majority = int(np.argmax(counts))
        expected.append(np.mean(y[val] == majority))
    assert cv.mean("accuracy") == pytest.approx(np.mean(expected), abs=1e-12)
    assert len(cv.folds) == 4 and len(cv.fit_seconds) == 4


def test_kfold_cv_deterministic():
    rng = np.random.default_rng(1)
    d = numeric_dataset(rng.normal(size=(60, 2)), rng.integers(0, 2, 60))
    a = kfold_cv(NaiveBayes, d, 5, seed=7).folds
    b = kfold_cv(NaiveBayes, d, 5, seed=7).folds
    assert a == b


def test_rolling_splits_forward_only():
    splits = rolling_splits(10, 3)
    ends = [tr[-1] for tr, _ in splits]
    assert ends == sorted(set(ends))
    for tr, va in splits:
        assert va.min() > tr.max()
        assert va[0] == tr[-1] + 1
    assert splits[-1][1][-1] == 9
    with pytest.raises(ValueError):
        rolling_splits(3, 3)


class TrendFollower:
    """Least-squares line of feature v against feature t."""

    def fit(self, d):
        self.coef = np.polyfit(d.X[:, 0], d.X[:, 1], 1)
        return self


class LastValue:
    def fit(self, d):
        self.last = d.X[-1, 1]
        return self


def _mae_scoring(model, val):
    if isinstance(model, TrendFollower):
        pred = np.polyval(model.coef, val.X[:, 0])
    else:
        pred = np.full(len(val), model.last)
    return {"mae": float(np.mean(np.abs(pred - val.X[:, 1])))}


def test_rolling_cv_linear_series_oracle():
    t = np.arange(40, dtype=float)
    d = numeric_dataset(np.column_stack([t, 2 * t + 1]), np.zeros(40, dtype=int), n_classes=1)
    trend = rolling_cv(TrendFollower, d, 4, scoring=_mae_scoring)
    last = rolling_cv(LastValue, d, 4, scoring=_mae_scoring)
    assert all(r["mae"] < 1e-9 for r in trend)
    # block b = 8: errors 2, 4, ..., 16 give MAE b + 1 on each equal-size block
    assert [r["mae"] for r in last] == pytest.approx([9.0, 9.0, 9.0, 9.0])
    assert all(a["mae"] < b["mae"] for a, b in zip(trend, last))


def test_holdout_split_partition():
    tr, te = holdout_split(50, 0.2, seed=1)
    assert len(te) == 10 and sorted(np.concatenate([tr, te]).tolist()) == list(range(50))


class Scripted(OnlineClassifier):
    """Predicts the label it last learned; records call order."""

    def __init__(self, n_classes=2):
        self.n_classes = n_classes
        self.calls = []
        self.last = None

    def predict_proba_one(self, x):
        p = np.full(self.n_classes, 1.0 / self.n_classes)
        if self.last is not None:
            p = np.zeros(self.n_classes)
            p[self.last] = 1.0
        return p

    def predict_one(self, x):
        self.calls.append(("predict", x.values[0]))
        return super().predict_one(x)

    def learn_one(self, x):
        self.calls.append(("learn", x.values[0]))
        self.last = x.label

    def reset(self):
        self.last = None


def _instances(labels):
    return [Instance((float(i),), int(c)) for i, c in enumerate(labels)]


def test_prequential_four_instances_one_wrong():
    # first prediction defaults to class 0, then the previous label is repeated
    trace = prequential_eval(_instances([0, 0, 1, 1]), Scripted())
    assert trace.cumulative_loss == [0, 0, 1, 1]
    assert trace.loss == 1 and trace.accuracy == 0.75


@pytest.mark.parametrize("n", [1, 10, 500])
def test_prequential_constant_stream(n):
    trace = prequential_eval(_instances([1] * n), Scripted())
    assert trace.accuracy == pytest.approx((n - 1) / n)
    assert np.all(np.diff(trace.cumulative_loss) >= 0)
    assert len(trace) == n


def test_prequential_hook_order():
    model = Scripted()
    hooks = []
    prequential_eval(_instances([0, 1, 1, 0, 1]), model, hook=lambda stage, i: hooks.append((stage, i)))
    assert hooks == [(s, i) for i in range(5) for s in ("predict", "learn")]
    assert model.calls == [(s, float(i)) for i in range(5) for s in ("predict", "learn")]


def test_prequential_detector_events_and_reset():
    labels = [0] * 300 + [1, 0] * 300
    model = Scripted()
    trace = prequential_eval(_instances(labels), model, detectors={"DDM": DDM()}, on_drift="reset")
    assert trace.events and all(e.index >= 300 for e in trace.events)
    assert {e.status for e in trace.events} <= {"Warning", "Drift"}
    rows = list(trace.timeline_rows())
    assert len(rows) == len(labels)
    assert any(r[2] for r in rows)


def test_prequential_max_instances_and_timing():
    trace = prequential_eval(_instances([0] * 50), Scripted(), max_instances=20, start_index=100)
    assert len(trace) == 20
    assert trace.learn_seconds >= 0 and trace.predict_seconds >= 0


def test_prequential_frozen_vs_learning_on_drift():
    spec = two_concept_spec(segment=2000, noise=0.05, seed=11)
    data = stream_to_dataset(generate_stream(spec))
    frozen = FrozenClassifier(cart_fit(data.subset(range(1000))), data.schema)
    tr_frozen = prequential_eval(list(data)[1000:], frozen)
    tr_ht = prequential_eval(list(data)[1000:], HoeffdingTree(data.schema))
    assert tr_ht.accuracy > tr_frozen.accuracy
