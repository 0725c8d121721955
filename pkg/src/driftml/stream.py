"""Tabular data model, CSV ingestion and synthetic drift streams.

A :class:`Dataset` keeps the feature matrix as a float array: numeric cells
hold their value, categorical cells hold the integer category id, and missing
cells are ``NaN``. Class labels are stored separately as integer ids that
index ``schema.class_labels``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    HintMismatchError,
    RaggedRowError,
    SchemaError,
    SpecError,
    UnreadableFileError,
)

MISSING_MARKERS = frozenset({"", "NaN", "nan", "null", "?"})


class Kind(str, enum.Enum):
    NUMERIC = "Numeric"
    CATEGORICAL = "Categorical"


@dataclass(frozen=True)
class Column:
    name: str
    kind: Kind
    categories: tuple[str, ...] = ()

    @property
    def is_categorical(self) -> bool:
        return self.kind is Kind.CATEGORICAL


@dataclass(frozen=True)
class Schema:
    """Ordered columns plus an optional label column.

    ``columns`` includes the label column (when set) in file order; the
    feature view excludes it.
    """

    columns: tuple[Column, ...]
    label_column: str | None = None
    class_labels: tuple[str, ...] = ()

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names: {dupes}")
        if self.label_column is not None:
            if self.label_column not in names:
                raise SchemaError(f"label column {self.label_column!r} not in columns")
            if not self.class_labels:
                raise SchemaError("class_labels must be non-empty when label_column is set")

    @property
    def feature_columns(self) -> tuple[Column, ...]:
        return tuple(c for c in self.columns if c.name != self.label_column)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.feature_columns]

    @property
    def n_features(self) -> int:
        return len(self.feature_columns)

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    @property
    def categorical_mask(self) -> np.ndarray:
        return np.array([c.is_categorical for c in self.feature_columns], dtype=bool)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def feature_index(self, name: str) -> int:
        return self.feature_names.index(name)

    def with_features(self, features: Sequence[Column]) -> "Schema":
        """Return a schema with the given feature columns, keeping the label."""
        cols = list(features)
        if self.label_column is not None:
            cols.append(self.column(self.label_column))
        return Schema(tuple(cols), self.label_column, self.class_labels)

    def to_dict(self) -> dict:
        return {
            "columns": [
                {"name": c.name, "kind": c.kind.value, "categories": list(c.categories)}
                for c in self.columns
            ],
            "label_column": self.label_column,
            "class_labels": list(self.class_labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        cols = tuple(
            Column(c["name"], Kind(c["kind"]), tuple(c.get("categories", ())))
            for c in d["columns"]
        )
        return cls(cols, d.get("label_column"), tuple(d.get("class_labels", ())))


@dataclass(slots=True)
class Instance:
    """One row: feature values (``NaN`` = missing), optional class id, weight."""

    values: tuple
    label: int | None = None
    weight: float = 1.0


class Dataset:
    """Immutable batch of rows conforming to a schema."""

    def __init__(self, schema: Schema, X, y=None, weights=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            X = X.reshape(len(X), -1) if X.size else np.zeros((0, schema.n_features))
        if X.shape[1] != schema.n_features:
            raise SchemaError(
                f"row arity {X.shape[1]} does not match schema arity {schema.n_features}"
            )
        for j, col in enumerate(schema.feature_columns):
            if col.is_categorical:
                v = X[:, j]
                v = v[~np.isnan(v)]
                if v.size and (
                    np.any(v < 0) or np.any(v >= len(col.categories)) or np.any(v != np.round(v))
                ):
                    raise SchemaError(f"invalid category id in column {col.name!r}")
            elif np.any(np.isinf(X[:, j])):
                raise SchemaError(f"non-finite value in numeric column {col.name!r}")
        if y is not None:
            y = np.asarray(y, dtype=np.int64)
            if y.shape != (X.shape[0],):
                raise SchemaError("label vector length does not match row count")
            if y.size and (y.min() < 0 or y.max() >= schema.n_classes):
                raise SchemaError("class id outside schema.class_labels")
        if weights is None:
            weights = np.ones(X.shape[0])
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (X.shape[0],) or np.any(weights < 0):
            raise SchemaError("weights must be non-negative, one per row")
        X.setflags(write=False)
        weights.setflags(write=False)
        if y is not None:
            y.setflags(write=False)
        self.schema = schema
        self.X = X
        self.y = y
        self.weights = weights

    def __len__(self) -> int:
        return self.X.shape[0]

    def __iter__(self) -> Iterator[Instance]:
        for i in range(len(self)):
            yield self.row(i)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        same_y = (self.y is None and other.y is None) or (
            self.y is not None and other.y is not None and np.array_equal(self.y, other.y)
        )
        return (
            self.schema == other.schema
            and self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X, equal_nan=True)
            and same_y
            and np.array_equal(self.weights, other.weights)
        )

    def row(self, i: int) -> Instance:
        label = None if self.y is None else int(self.y[i])
        return Instance(tuple(self.X[i].tolist()), label, float(self.weights[i]))

    @property
    def is_labeled(self) -> bool:
        return self.y is not None

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.schema,
            self.X[idx],
            None if self.y is None else self.y[idx],
            self.weights[idx],
        )

    def select_features(self, names: Sequence[str]) -> "Dataset":
        idx = [self.schema.feature_index(n) for n in names]
        cols = [self.schema.feature_columns[i] for i in idx]
        return Dataset(self.schema.with_features(cols), self.X[:, idx], self.y, self.weights)

    def feature(self, name: str) -> np.ndarray:
        return self.X[:, self.schema.feature_index(name)]

    def class_counts(self) -> np.ndarray:
        if self.y is None:
            raise SchemaError("dataset is unlabeled")
        return np.bincount(self.y, minlength=self.schema.n_classes)

    @classmethod
    def from_instances(cls, schema: Schema, instances: Sequence[Instance]) -> "Dataset":
        X = np.array([inst.values for inst in instances], dtype=float).reshape(
            len(instances), schema.n_features
        )
        labels = [inst.label for inst in instances]
        y = None if schema.label_column is None else np.array(labels, dtype=np.int64)
        w = np.array([inst.weight for inst in instances], dtype=float)
        return cls(schema, X, y, w)


# ---------------------------------------------------------------------------
# CSV ingestion


def _parse_real(cell: str) -> float | None:
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _label_sort_key(label: str):
    v = _parse_real(label)
    return (0, v, label) if v is not None else (1, 0.0, label)


def load_csv(path, schema_hint: Schema | None = None, label_column: str | None = None) -> Dataset:
    """Read a headed, comma-separated UTF-8 file into a :class:`Dataset`.

    Without a hint, a column is numeric iff every non-missing cell parses as a
    finite real. The label column comes from the hint or ``label_column``; it
    is never guessed. Class labels are ordered numerically when every label
    parses as a number, otherwise lexicographically.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}", path=str(path)) from exc
    if not rows:
        raise UnreadableFileError(f"{path}: missing header row", path=str(path))
    header, body = rows[0], rows[1:]
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names in header")
    for i, r in enumerate(body, start=1):
        if len(r) != len(header):
            raise RaggedRowError(
                f"{path}: row {i} has {len(r)} cells, header has {len(header)}",
                path=str(path),
                row=i,
            )

    if schema_hint is not None:
        hint_names = [c.name for c in schema_hint.columns]
        if hint_names != header:
            missing = [n for n in hint_names if n not in header]
            extra = [n for n in header if n not in hint_names]
            bad = (missing or extra or ["<order>"])[0]
            raise HintMismatchError(
                f"{path}: schema hint columns {hint_names} do not match header {header}",
                path=str(path),
                column=bad,
            )
        if label_column is not None and label_column != schema_hint.label_column:
            raise HintMismatchError(
                f"{path}: label column {label_column!r} disagrees with hint",
                path=str(path),
                column=label_column,
            )
        label_column = schema_hint.label_column
    elif label_column is not None and label_column not in header:
        raise HintMismatchError(
            f"{path}: label column {label_column!r} not in header", path=str(path), column=label_column
        )

    n = len(body)
    columns: list[Column] = []
    data: dict[str, list] = {}
    for j, name in enumerate(header):
        cells = [r[j] for r in body]
        if name == label_column:
            continue
        hinted = schema_hint.columns[j] if schema_hint is not None else None
        parsed = [None if c in MISSING_MARKERS else _parse_real(c) for c in cells]
        if hinted is not None:
            numeric = hinted.kind is Kind.NUMERIC
            if numeric:
                for i, (c, v) in enumerate(zip(cells, parsed), start=1):
                    if v is None and c not in MISSING_MARKERS:
                        raise HintMismatchError(
                            f"{path}: row {i} column {name!r}: {c!r} is not a finite real",
                            path=str(path),
                            row=i,
                            column=name,
                        )
        else:
            numeric = all(v is not None for c, v in zip(cells, parsed) if c not in MISSING_MARKERS)
        if numeric:
            columns.append(Column(name, Kind.NUMERIC))
            data[name] = [math.nan if v is None else v for v in parsed]
            continue
        cats = list(hinted.categories) if hinted is not None else []
        index = {c: k for k, c in enumerate(cats)}
        codes = []
        for i, c in enumerate(cells, start=1):
            if c in MISSING_MARKERS:
                codes.append(math.nan)
                continue
            if c not in index:
                if hinted is not None and hinted.categories:
                    raise HintMismatchError(
                        f"{path}: row {i} column {name!r}: category {c!r} not in hint",
                        path=str(path),
                        row=i,
                        column=name,
                    )
                index[c] = len(cats)
                cats.append(c)
            codes.append(float(index[c]))
        columns.append(Column(name, Kind.CATEGORICAL, tuple(cats)))
        data[name] = codes

    y = None
    class_labels: tuple[str, ...] = ()
    label_col = None
    if label_column is not None:
        j = header.index(label_column)
        cells = [r[j] for r in body]
        for i, c in enumerate(cells, start=1):
            if c in MISSING_MARKERS:
                raise SchemaError(f"{path}: row {i} has a missing label in {label_column!r}")
        if schema_hint is not None and schema_hint.class_labels:
            class_labels = schema_hint.class_labels
            for i, c in enumerate(cells, start=1):
                if c not in class_labels:
                    raise HintMismatchError(
                        f"{path}: row {i}: label {c!r} not in hinted class labels",
                        path=str(path),
                        row=i,
                        column=label_column,
                    )
        else:
            class_labels = tuple(sorted(set(cells), key=_label_sort_key))
        lookup = {c: k for k, c in enumerate(class_labels)}
        y = np.array([lookup[c] for c in cells], dtype=np.int64)
        label_col = Column(label_column, Kind.CATEGORICAL, class_labels)

    ordered = []
    for name in header:
        if name == label_column:
            ordered.append(label_col)
        else:
            ordered.append(next(c for c in columns if c.name == name))
    schema = Schema(tuple(ordered), label_column, class_labels)
    feats = [c.name for c in schema.feature_columns]
    X = np.array([data[nm] for nm in feats], dtype=float).T.reshape(n, len(feats))
    return Dataset(schema, X, y)


def _format_cell(value: float, col: Column) -> str:
    if math.isnan(value):
        return ""
    if col.is_categorical:
        return col.categories[int(value)]
    return repr(float(value))


def write_csv(dataset: Dataset, path) -> None:
    """Write ``dataset`` so that :func:`load_csv` reproduces it exactly."""
    schema = dataset.schema
    feats = schema.feature_columns
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([c.name for c in schema.columns])
        for i in range(len(dataset)):
            row = dataset.X[i]
            fi = 0
            out = []
            for c in schema.columns:
                if c.name == schema.label_column:
                    out.append(schema.class_labels[int(dataset.y[i])])
                else:
                    out.append(_format_cell(row[fi], feats[fi]))
                    fi += 1
            w.writerow(out)


# ---------------------------------------------------------------------------
# Streams


class DataStream:
    """Single-consumer pull iterator of :class:`Instance` objects."""

    schema: Schema

    def __iter__(self):
        return self

    def __next__(self) -> Instance:  # pragma: no cover - abstract
        raise NotImplementedError

    def take(self, n: int) -> list[Instance]:
        out = []
        for _ in range(n):
            try:
                out.append(next(self))
            except StopIteration:
                break
        return out


class DatasetStream(DataStream):
    """Replays the rows of a dataset in ingest order."""

    def __init__(self, dataset: Dataset):
        self.schema = dataset.schema
        self._dataset = dataset
        self._i = 0

    def __len__(self):
        return len(self._dataset)

    def __next__(self) -> Instance:
        if self._i >= len(self._dataset):
            raise StopIteration
        inst = self._dataset.row(self._i)
        self._i += 1
        return inst


class DriftKind(str, enum.Enum):
    SUDDEN = "Sudden"
    GRADUAL = "Gradual"
    RECURRING = "Recurring"


@dataclass(frozen=True)
class Condition:
    feature: int
    op: str  # ">" or "<="
    threshold: float

    def holds(self, x) -> bool:
        v = x[self.feature]
        return v > self.threshold if self.op == ">" else v <= self.threshold


@dataclass(frozen=True)
class ConceptSpec:
    """Axis-aligned rule: class 1 when the conditions hold (all or any), else 0."""

    conditions: tuple[Condition, ...]
    combine: str = "all"

    def label(self, x) -> int:
        results = (c.holds(x) for c in self.conditions)
        hit = all(results) if self.combine == "all" else any(results)
        return int(hit)

    def to_dict(self) -> dict:
        return {
            "conditions": [[c.feature, c.op, c.threshold] for c in self.conditions],
            "combine": self.combine,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConceptSpec":
        conds = tuple(Condition(int(f), str(op), float(t)) for f, op, t in d["conditions"])
        return cls(conds, d.get("combine", "all"))


@dataclass(frozen=True)
class DriftStreamSpec:
    drift_kind: DriftKind
    concepts: tuple[ConceptSpec, ...]
    segment_length: int
    transition_length: int = 0
    noise_rate: float = 0.0
    seed: int = 0
    n_features: int = 3
    n_instances: int | None = None

    @property
    def length(self) -> int:
        if self.n_instances is not None:
            return self.n_instances
        return len(self.concepts) * self.segment_length

    def validate(self) -> None:
        problems = {}
        try:
            kind = DriftKind(self.drift_kind)
        except ValueError:
            problems["drift_kind"] = f"unknown kind {self.drift_kind!r}"
            kind = None
        if len(self.concepts) < 2:
            problems["concepts"] = "at least 2 concepts are required"
        else:
            for k, c in enumerate(self.concepts):
                if not 1 <= len(c.conditions) <= 3:
                    problems["concepts"] = f"concept {k} must have 1 to 3 conditions"
                elif any(not 0 <= cd.feature < self.n_features for cd in c.conditions):
                    problems["concepts"] = f"concept {k} references a feature outside 0..{self.n_features - 1}"
                elif any(cd.op not in (">", "<=") for cd in c.conditions):
                    problems["concepts"] = f"concept {k} uses an unknown operator"
                elif c.combine not in ("all", "any"):
                    problems["concepts"] = f"concept {k} combine must be 'all' or 'any'"
        if not isinstance(self.segment_length, int) or self.segment_length < 1:
            problems["segment_length"] = "must be a positive integer"
        if not isinstance(self.transition_length, int) or self.transition_length < 0:
            problems["transition_length"] = "must be a non-negative integer"
        elif kind is not DriftKind.GRADUAL and self.transition_length != 0:
            problems["transition_length"] = "must be 0 unless drift_kind is Gradual"
        elif (
            kind is DriftKind.GRADUAL
            and isinstance(self.segment_length, int)
            and self.transition_length > self.segment_length
        ):
            problems["transition_length"] = "must not exceed segment_length"
        if not (isinstance(self.noise_rate, (int, float)) and 0.0 <= self.noise_rate <= 1.0):
            problems["noise_rate"] = "must lie in [0, 1]"
        if not isinstance(self.seed, int) or not -(2**63) <= self.seed < 2**64:
            problems["seed"] = "must be a 64-bit integer"
        if not isinstance(self.n_features, int) or self.n_features < 1:
            problems["n_features"] = "must be a positive integer"
        if self.n_instances is not None and (
            not isinstance(self.n_instances, int) or self.n_instances < 0
        ):
            problems["n_instances"] = "must be a non-negative integer"
        if problems:
            raise SpecError(problems)

    def to_dict(self) -> dict:
        return {
            "drift_kind": DriftKind(self.drift_kind).value,
            "concepts": [c.to_dict() for c in self.concepts],
            "segment_length": self.segment_length,
            "transition_length": self.transition_length,
            "noise_rate": self.noise_rate,
            "seed": self.seed,
            "n_features": self.n_features,
            "n_instances": self.n_instances,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DriftStreamSpec":
        try:
            kind = DriftKind(d["drift_kind"])
        except (KeyError, ValueError):
            raise SpecError({"drift_kind": f"unknown kind {d.get('drift_kind')!r}"})
        try:
            concepts = tuple(ConceptSpec.from_dict(c) for c in d["concepts"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError({"concepts": f"malformed concept list ({exc})"})
        return cls(
            drift_kind=kind,
            concepts=concepts,
            segment_length=d.get("segment_length", 0),
            transition_length=d.get("transition_length", 0),
            noise_rate=d.get("noise_rate", 0.0),
            seed=d.get("seed", 0),
            n_features=d.get("n_features", 3),
            n_instances=d.get("n_instances"),
        )

    def concept_schedule(self, i: int) -> tuple[int, int, float]:
        """(old concept, new concept, probability of drawing the new one) at index ``i``."""
        L = self.segment_length
        C = len(self.concepts)
        seg = i // L
        if self.drift_kind is DriftKind.RECURRING:
            k = seg % C
            return k, k, 1.0
        k = min(seg, C - 1)
        if self.drift_kind is DriftKind.GRADUAL and 1 <= seg <= C - 1:
            offset = i - seg * L
            T = self.transition_length
            if offset < T:
                return seg - 1, seg, (offset + 0.5) / T
        return k, k, 1.0


def _schema_for(spec: DriftStreamSpec) -> Schema:
    cols = tuple(Column(f"x{j}", Kind.NUMERIC) for j in range(spec.n_features))
    label = Column("class", Kind.CATEGORICAL, ("0", "1"))
    return Schema(cols + (label,), "class", ("0", "1"))


class SyntheticStream(DataStream):
    """Seeded drift stream over uniform [0, 1) features.

    ``concept_ids`` records, per emitted instance, which concept labelled it.
    """

    def __init__(self, spec: DriftStreamSpec):
        spec.validate()
        self.spec = spec
        self.schema = _schema_for(spec)
        self._rng = np.random.Generator(np.random.PCG64(spec.seed % 2**64))
        self._i = 0
        self.concept_ids: list[int] = []

    def __len__(self):
        return self.spec.length

    def __next__(self) -> Instance:
        if self._i >= self.spec.length:
            raise StopIteration
        spec = self.spec
        draws = self._rng.random(spec.n_features + 2)
        x = tuple(draws[: spec.n_features].tolist())
        old, new, p_new = spec.concept_schedule(self._i)
        k = new if draws[-2] < p_new else old
        y = spec.concepts[k].label(x)
        if draws[-1] < spec.noise_rate:
            y = 1 - y
        self.concept_ids.append(k)
        self._i += 1
        return Instance(x, y, 1.0)


def generate_stream(spec: DriftStreamSpec) -> SyntheticStream:
    """Build the seeded stream described by ``spec`` (validated field by field)."""
    return SyntheticStream(spec)


def stream_to_dataset(stream: DataStream, n: int | None = None) -> Dataset:
    items = list(stream) if n is None else stream.take(n)
    return Dataset.from_instances(stream.schema, items)
