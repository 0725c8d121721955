import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import numeric_dataset
from driftml.errors import SchemaError
from driftml.features import (CumulativeImportance, FeatureScores, TopK, auto_feature_selection,
                              drop_redundant, equal_frequency_bins, feature_scores, information_gain,
                              information_gain_from_table, pearson_r, select_by_ig)
from driftml.stream import Column, Dataset, Kind, Schema


def _cat_dataset(x, y, n_cats):
    cats = tuple(f"c{i}" for i in range(n_cats))
    schema = Schema((Column("x", Kind.CATEGORICAL, cats), Column("y", Kind.CATEGORICAL, ("0", "1"))),
                    "y", ("0", "1"))
    return Dataset(schema, np.asarray(x, dtype=float)[:, None], np.asarray(y))


def _from_table(table):
    xs, ys = [], []
    for i, row in enumerate(table):
        for c, count in enumerate(row):
            xs += [i] * count
            ys += [c] * count
    return _cat_dataset(xs, ys, len(table))


def test_identical_feature_has_one_bit():
    y = np.array([0, 1] * 50)
    assert information_gain(numeric_dataset(y[:, None], y), "x0") == pytest.approx(1.0, abs=1e-12)


def test_independent_feature_has_zero_gain():
    assert information_gain(_from_table([[10, 20], [30, 60]]), "x") == pytest.approx(0.0, abs=1e-12)


def test_two_by_two_table_oracle():
    # H(Y) = 1; each row has class split (3/4, 1/4).
    h_row = -(0.75 * math.log2(0.75) + 0.25 * math.log2(0.25))
    expected = 1.0 - (0.5 * h_row + 0.5 * h_row)
    assert information_gain(_from_table([[30, 10], [10, 30]]), "x") == pytest.approx(expected, abs=1e-12)
    assert information_gain_from_table([[30, 10], [10, 30]]) == pytest.approx(expected, abs=1e-12)


def test_unlabeled_dataset_errors():
    schema = Schema((Column("x", Kind.NUMERIC),), None, ())
    with pytest.raises(SchemaError):
        information_gain(Dataset(schema, np.zeros((3, 1))), "x")


def test_equal_frequency_bins_balanced():
    bins = equal_frequency_bins(np.arange(100, dtype=float), 10)
    assert np.bincount(bins).tolist() == [10] * 10


tables = st.lists(st.lists(st.integers(0, 20), min_size=2, max_size=2), min_size=1, max_size=5).filter(
    lambda t: sum(map(sum, t)) > 0)


@settings(max_examples=80, deadline=None)
@given(table=tables, perm_seed=st.integers(0, 100))
def test_ig_bounds_and_relabel_invariance(table, perm_seed):
    d = _from_table(table)
    ig = information_gain(d, "x")
    col_totals = np.array(table).sum(axis=0)
    p = col_totals[col_totals > 0] / col_totals.sum()
    h_y = float(-(p * np.log2(p)).sum())
    assert 0 <= ig <= h_y + 1e-12
    perm = np.random.default_rng(perm_seed).permutation(len(table))
    relabeled = _cat_dataset(perm[d.X[:, 0].astype(int)], d.y, len(table))
    assert information_gain(relabeled, "x") == pytest.approx(ig, abs=1e-12)


def _scores(**kw):
    return FeatureScores.from_mapping(list(kw), list(kw.values()))


def test_select_by_ig_examples():
    s = _scores(a=0.5, b=0.3, c=0.2)
    assert select_by_ig(s, TopK(2)) == ["a", "b"]
    assert select_by_ig(s, CumulativeImportance(0.8)) == ["a", "b"]
    assert select_by_ig(_scores(a=0.0, b=0.0, c=0.0), CumulativeImportance(0.9)) == ["a", "b", "c"]
    with pytest.raises(ValueError):
        select_by_ig(s, TopK(4))


def test_scores_sorted_with_column_tiebreak():
    s = _scores(a=0.1, b=0.3, c=0.1)
    assert s.names == ["b", "a", "c"]


def test_pearson_examples():
    x = np.array([1.0, 2.0, 5.0, 3.0])
    assert pearson_r(x, x) == pytest.approx(1.0)
    assert pearson_r(x, -x) == pytest.approx(-1.0)
    a, b = np.array([1.0, 2, 3]), np.array([2.0, 4, 6.1])
    oracle = ((a - a.mean()) * (b - b.mean())).sum() / math.sqrt(((a - a.mean()) ** 2).sum() * ((b - b.mean()) ** 2).sum())
    assert pearson_r(a, b) == pytest.approx(oracle, abs=1e-12)
    assert abs(pearson_r(a, b) - 1) < 1e-3
    assert pearson_r(a, np.ones(3), return_flag=True) == (0.0, True)
    with pytest.raises(ValueError):
        pearson_r([1, 2], [1, 2, 3])


vectors = st.lists(st.floats(-100, 100), min_size=3, max_size=20)


@settings(max_examples=60, deadline=None)
@given(x=vectors, seed=st.integers(0, 1000), scale=st.floats(0.1, 10), shift=st.floats(-5, 5))
def test_pearson_affine_invariance(x, seed, scale, shift):
    x = np.array(x)
    y = np.random.default_rng(seed).normal(size=x.size)
    if np.ptp(x) < 1e-3:
        return
    r = pearson_r(x, y)
    assert abs(r) <= 1
    assert pearson_r(scale * x + shift, y) == pytest.approx(r, abs=1e-9)


def test_drop_redundant_duplicate_pair():
    rng = np.random.default_rng(0)
    a = rng.random(50)
    d = numeric_dataset(np.column_stack([a, a, rng.random(50)]), (a > 0.5).astype(int))
    rep = drop_redundant(d, feature_scores(d), 0.9)
    assert len(rep.dropped_redundant) == 1
    dropped, partner, r = rep.dropped_redundant[0]
    assert {dropped, partner} == {"x0", "x1"} and dropped == "x1"  # equal IG drops the later column
    assert r == pytest.approx(1.0)
    assert set(rep.kept) | {dropped} == {"x0", "x1", "x2"}


def test_drop_redundant_none_above_threshold():
    rng = np.random.default_rng(1)
    d = numeric_dataset(rng.random((200, 3)), rng.integers(0, 2, 200))
    assert drop_redundant(d, feature_scores(d), 0.9).dropped_redundant == []


def test_drop_redundant_triple_keeps_highest_ig():
    a = np.random.default_rng(2).random(30)
    d = numeric_dataset(np.column_stack([a, a, a]), (a > 0.5).astype(int))
    scores = _scores(x0=0.2, x1=0.5, x2=0.3)
    rep = drop_redundant(d, scores, 0.9)
    # Greedy order (x0,x1) drops x0, (x0,x2) is skipped, (x1,x2) drops x2.
    assert rep.kept == ["x1"]
    assert [t[:2] for t in rep.dropped_redundant] == [("x0", "x1"), ("x2", "x1")]


def test_auto_feature_selection_shrinks_and_partitions():
    rng = np.random.default_rng(3)
    n = 400
    signal = rng.random(n)
    y = (signal > 0.5).astype(int)
    X = np.column_stack([signal, signal * 2 + 1, rng.random(n), rng.random(n)])
    d = numeric_dataset(X, y)
    rep, scores = auto_feature_selection(d, CumulativeImportance(0.9), 0.9)
    assert rep.kept == ["x0"]
    removed = {n for n, _ in rep.dropped_irrelevant} | {t[0] for t in rep.dropped_redundant}
    assert removed | set(rep.kept) == set(d.schema.feature_names)
    assert not removed & set(rep.kept)
    assert auto_feature_selection(d, CumulativeImportance(0.9), 0.9)[0].to_dict() == rep.to_dict()
