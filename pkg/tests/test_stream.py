import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import two_concept_spec
from driftml.errors import HintMismatchError, RaggedRowError, SchemaError, SpecError, UnreadableFileError
from driftml.stream import (Column, ConceptSpec, Condition, Dataset, DriftKind, DriftStreamSpec, Kind,
                            Schema, generate_stream, load_csv, stream_to_dataset, write_csv)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_kind_inference(tmp_path):
    p = _write(tmp_path, "a,b,label\n1.5,x,0\n2,y,1\n-3e2,x,0\n")
    d = load_csv(p, label_column="label")
    kinds = [c.kind for c in d.schema.feature_columns]
    assert kinds == [Kind.NUMERIC, Kind.CATEGORICAL]
    assert d.schema.column("b").categories == ("x", "y")
    assert d.y.tolist() == [0, 1, 0]


@pytest.mark.parametrize("marker", ["", "NaN", "nan", "null", "?"])
def test_missing_markers(tmp_path, marker):
    p = _write(tmp_path, f"a,b\n1,2\n{marker},3\n4,5\n")
    d = load_csv(p)
    assert d.schema.column("a").kind is Kind.NUMERIC
    assert math.isnan(d.X[1, 0])
    assert d.X[2, 0] == 4.0


def test_infinite_cell_is_categorical(tmp_path):
    p = _write(tmp_path, "a\n1\ninf\n")
    assert load_csv(p).schema.column("a").kind is Kind.CATEGORICAL


def test_ragged_row_cites_row(tmp_path):
    p = _write(tmp_path, "a,b,c\n1,2,3\n4,5\n")
    with pytest.raises(RaggedRowError) as exc:
        load_csv(p)
    assert exc.value.row == 2
    assert "2" in str(exc.value)


def test_unreadable_file(tmp_path):
    with pytest.raises(UnreadableFileError):
        load_csv(tmp_path / "absent.csv")


def test_hint_mismatch_names_column(tmp_path):
    p = _write(tmp_path, "a,b\n1,2\n")
    hint = Schema((Column("a", Kind.NUMERIC), Column("z", Kind.NUMERIC)), None, ())
    with pytest.raises(HintMismatchError) as exc:
        load_csv(p, schema_hint=hint)
    assert exc.value.column == "z"


def test_hint_forces_numeric_parse_error(tmp_path):
    p = _write(tmp_path, "a\n1\nfoo\n")
    hint = Schema((Column("a", Kind.NUMERIC),), None, ())
    with pytest.raises(HintMismatchError) as exc:
        load_csv(p, schema_hint=hint)
    assert exc.value.row == 2 and exc.value.column == "a"


def test_label_missing_is_error(tmp_path):
    p = _write(tmp_path, "a,y\n1,0\n2,?\n")
    with pytest.raises(SchemaError):
        load_csv(p, label_column="y")


def test_unknown_label_column(tmp_path):
    p = _write(tmp_path, "a,y\n1,0\n")
    with pytest.raises(HintMismatchError):
        load_csv(p, label_column="nope")


def test_no_label_unless_asked(tmp_path):
    p = _write(tmp_path, "a,class\n1,0\n2,1\n")
    d = load_csv(p)
    assert d.schema.label_column is None and d.y is None


def test_sudden_labels_follow_segments():
    spec = two_concept_spec(DriftKind.SUDDEN, segment=1000)
    s = generate_stream(spec)
    items = list(s)
    assert len(items) == 2000
    for i, inst in enumerate(items):
        concept = spec.concepts[0] if i < 1000 else spec.concepts[1]
        assert inst.label == concept.label(inst.values)
    assert s.concept_ids[:1000] == [0] * 1000 and s.concept_ids[1000:] == [1] * 1000


def test_recurring_cycles():
    spec = two_concept_spec(DriftKind.RECURRING, segment=500, n_instances=2000)
    s = generate_stream(spec)
    list(s)
    ids = s.concept_ids
    assert ids[0:500] == ids[1000:1500]
    assert ids[500:1000] == ids[1500:2000]
    assert ids[0] != ids[500]


def test_gradual_mixing_fraction_over_seeds():
    # Inside the window the expected fraction of new-concept draws is 0.5.
    fracs = []
    for seed in range(100):
        spec = two_concept_spec(DriftKind.GRADUAL, segment=1000, transition=200, seed=seed)
        s = generate_stream(spec)
        list(s)
        fracs.append(np.mean(np.array(s.concept_ids[1000:1200]) == 1))
    assert abs(np.mean(fracs) - 0.5) <= 0.05


def test_gradual_probability_rises_linearly():
    spec = two_concept_spec(DriftKind.GRADUAL, segment=1000, transition=200)
    probs = [spec.concept_schedule(i)[2] for i in range(1000, 1200)]
    assert np.all(np.diff(probs) > 0)
    assert probs[0] == pytest.approx(0.5 / 200) and probs[-1] == pytest.approx(1 - 0.5 / 200)
    assert spec.concept_schedule(999) == (0, 0, 1.0)
    assert spec.concept_schedule(1200) == (1, 1, 1.0)


def test_noise_rate_flips_labels():
    spec = two_concept_spec(noise=0.2, segment=5000, seed=3)
    s = generate_stream(spec)
    items = list(s)
    flips = [inst.label != spec.concepts[k].label(inst.values) for inst, k in zip(items, s.concept_ids)]
    assert abs(np.mean(flips) - 0.2) < 0.02


def test_spec_errors_field_by_field():
    bad = DriftStreamSpec(DriftKind.SUDDEN, (ConceptSpec((Condition(0, ">", 0.5),)),), 0,
                          transition_length=5, noise_rate=1.5)
    with pytest.raises(SpecError) as exc:
        generate_stream(bad)
    assert set(exc.value.problems) >= {"concepts", "segment_length", "transition_length", "noise_rate"}


def test_spec_round_trip_dict():
    spec = two_concept_spec(DriftKind.GRADUAL, transition=10, noise=0.1, seed=9)
    assert DriftStreamSpec.from_dict(spec.to_dict()) == spec


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), n=st.integers(0, 300))
def test_determinism(seed, n):
    spec = two_concept_spec(segment=100, seed=seed, noise=0.1)
    a = generate_stream(spec).take(n)
    b = generate_stream(spec).take(n)
    assert a == b


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000), period_mult=st.integers(1, 3))
def test_recurring_concept_is_periodic(seed, period_mult):
    spec = two_concept_spec(DriftKind.RECURRING, segment=50, seed=seed, n_instances=600)
    period = 50 * len(spec.concepts)
    for i in range(0, 600 - period * period_mult):
        assert spec.concept_schedule(i) == spec.concept_schedule(i + period * period_mult)


cells = st.one_of(st.none(), st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False))


@settings(max_examples=40, deadline=None)
@given(rows=st.lists(st.tuples(cells, st.sampled_from(["a", "b", "c", None]), st.integers(0, 1)),
                     min_size=1, max_size=20))
def test_csv_round_trip(tmp_path_factory, rows):
    cats = ("a", "b", "c")
    schema = Schema((Column("num", Kind.NUMERIC), Column("cat", Kind.CATEGORICAL, cats),
                     Column("y", Kind.CATEGORICAL, ("0", "1"))), "y", ("0", "1"))
    X = np.array([[math.nan if v is None else v, math.nan if c is None else cats.index(c)]
                  for v, c, _ in rows], dtype=float)
    y = np.array([r[2] for r in rows])
    d = Dataset(schema, X, y)
    p = tmp_path_factory.mktemp("rt") / "d.csv"
    write_csv(d, p)
    back = load_csv(p, schema_hint=schema)
    assert back == d
    assert np.array_equal(np.isnan(back.X), np.isnan(d.X))


def test_stream_csv_round_trip(tmp_path):
    d = stream_to_dataset(generate_stream(two_concept_spec(segment=50, noise=0.1)))
    p = tmp_path / "s.csv"
    write_csv(d, p)
    back = load_csv(p, label_column="class")
    assert back.schema.feature_names == d.schema.feature_names
    assert np.array_equal(back.X, d.X) and np.array_equal(back.y, d.y)
