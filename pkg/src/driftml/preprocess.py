"""Automated data pre-processing: encoding, imputation, normalization, SMOTE.

Every transformer follows a fit/transform split so statistics learned on a
training split can be replayed on validation rows or later runs.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NotFittedError, PreprocessError, UnseenCategoryError
from .stream import Column, Dataset, Kind, Schema

# ---------------------------------------------------------------------------
# Missing values


def missing_report(d: Dataset) -> dict[str, tuple[int, float]]:
    """Per-feature (missing count, percentage of rows)."""
    n = len(d)
    counts = np.isnan(d.X).sum(axis=0)
    return {
        name: (int(c), 100.0 * c / n if n else 0.0)
        for name, c in zip(d.schema.feature_names, counts)
    }


NUMERIC_ONLY = {"Zero", "Mean", "Median", "MovingWindow"}
CATEGORICAL_ONLY = {"Mode"}
IMPUTE_METHODS = {"Drop", "Zero", "Mean", "Median", "Mode", "ForwardFill", "BackwardFill", "MovingWindow"}


@dataclass(frozen=True)
class ImputeMethod:
    name: str
    window: int | None = None

    def __post_init__(self):
        if self.name not in IMPUTE_METHODS:
            raise PreprocessError(f"unknown imputation method {self.name!r}")
        if self.name == "MovingWindow" and (self.window is None or self.window < 1):
            raise PreprocessError("MovingWindow needs a window size n >= 1")

    @classmethod
    def parse(cls, value) -> "ImputeMethod":
        if isinstance(value, ImputeMethod):
            return value
        if isinstance(value, dict):
            return cls(value["method"], value.get("window"))
        text = str(value)
        if text.startswith("MovingWindow(") and text.endswith(")"):
            return cls("MovingWindow", int(text[len("MovingWindow("):-1]))
        return cls(text)


@dataclass(frozen=True)
class ImputePolicy:
    """Default method plus per-column overrides.

    ``categorical_method`` is applied to categorical columns that have no
    override; ``None`` means they use ``method`` as well.
    """

    method: ImputeMethod = ImputeMethod("Mean")
    overrides: dict = field(default_factory=dict)
    categorical_method: ImputeMethod | None = None

    def method_for(self, col: Column) -> ImputeMethod:
        if col.name in self.overrides:
            return ImputeMethod.parse(self.overrides[col.name])
        if col.is_categorical and self.categorical_method is not None:
            return self.categorical_method
        return self.method


def _mode(values: np.ndarray) -> float:
    uniq, counts = np.unique(values, return_counts=True)
    return float(uniq[np.argmax(counts)])


class Imputer:
    """Learns per-column fill statistics from non-missing training cells."""

    def __init__(self, policy: ImputePolicy | None = None):
        self.policy = policy or ImputePolicy()
        self.methods: dict[str, ImputeMethod] = {}
        self.statistics: dict[str, float | None] = {}
        self.fallback: dict[str, float | None] = {}
        self._fitted = False

    def fit(self, d: Dataset) -> "Imputer":
        for j, col in enumerate(d.schema.feature_columns):
            m = self.policy.method_for(col)
            if col.is_categorical and m.name in NUMERIC_ONLY:
                raise PreprocessError(f"{m.name} imputation is numeric-only; column {col.name!r} is categorical")
            if not col.is_categorical and m.name in CATEGORICAL_ONLY:
                raise PreprocessError(f"{m.name} imputation is categorical-only; column {col.name!r} is numeric")
            v = d.X[:, j]
            present = v[~np.isnan(v)]
            stat = None
            if m.name in ("Mean", "Median", "Mode") and present.size == 0:
                raise PreprocessError(f"column {col.name!r} is entirely missing; no {m.name} exists")
            if m.name == "Mean":
                stat = float(present.mean())
            elif m.name == "Median":
                stat = float(np.median(present))
            elif m.name == "Mode":
                stat = _mode(present)
            elif m.name == "Zero":
                stat = 0.0
            fb = None
            if present.size:
                fb = _mode(present) if col.is_categorical else float(present.mean())
            self.methods[col.name] = m
            self.statistics[col.name] = stat
            self.fallback[col.name] = fb
        self._fitted = True
        return self

    def _fill_sequential(self, v: np.ndarray, m: ImputeMethod, fb, name) -> np.ndarray:
        out = v.copy()
        miss = np.isnan(out)
        if not miss.any():
            return out
        if fb is None:
            raise PreprocessError(f"column {name!r} has no non-missing value to fall back on")
        if m.name == "ForwardFill":
            last = fb
            for i in range(len(out)):
                if miss[i]:
                    out[i] = last
                else:
                    last = out[i]
        elif m.name == "BackwardFill":
            nxt = fb
            for i in range(len(out) - 1, -1, -1):
                if miss[i]:
                    out[i] = nxt
                else:
                    nxt = out[i]
        else:  # MovingWindow over previous observed values
            prev: list[float] = []
            for i in range(len(out)):
                if miss[i]:
                    out[i] = float(np.mean(prev[-m.window:])) if prev else fb
                else:
                    prev.append(out[i])
        return out

    def transform(self, d: Dataset) -> Dataset:
        if not self._fitted:
            raise NotFittedError("Imputer.transform called before fit")
        X = d.X.copy()
        drop = np.zeros(len(d), dtype=bool)
        for j, col in enumerate(d.schema.feature_columns):
            m = self.methods[col.name]
            miss = np.isnan(X[:, j])
            if not miss.any():
                continue
            if m.name == "Drop":
                drop |= miss
            elif m.name in ("ForwardFill", "BackwardFill", "MovingWindow"):
                X[:, j] = self._fill_sequential(X[:, j], m, self.fallback[col.name], col.name)
            else:
                X[miss, j] = self.statistics[col.name]
        keep = ~drop
        y = None if d.y is None else d.y[keep]
        return Dataset(d.schema, X[keep], y, d.weights[keep])

    def to_dict(self) -> dict:
        return {
            "methods": {k: {"method": m.name, "window": m.window} for k, m in self.methods.items()},
            "statistics": self.statistics,
            "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Imputer":
        imp = cls()
        imp.methods = {k: ImputeMethod.parse(v) for k, v in d["methods"].items()}
        imp.statistics = dict(d["statistics"])
        imp.fallback = dict(d["fallback"])
        imp._fitted = True
        return imp


def impute(d: Dataset, policy: ImputePolicy | None = None) -> Dataset:
    """Fill (or drop) every missing cell of ``d`` using statistics from ``d`` itself."""
    return Imputer(policy).fit(d).transform(d)


# ---------------------------------------------------------------------------
# Label encoding


@dataclass(frozen=True)
class EncodingMap:
    """Per categorical column: category text -> integer code (first-seen order)."""

    codes: dict  # column -> {text: code}

    def inverse(self, column: str) -> dict[int, str]:
        return {c: t for t, c in self.codes[column].items()}

    def encode_value(self, column: str, text: str) -> int:
        try:
            return self.codes[column][text]
        except KeyError:
            raise UnseenCategoryError(column, text) from None

    def decode_value(self, column: str, code: int) -> str:
        return self.inverse(column)[int(code)]

    def transform(self, d: Dataset) -> Dataset:
        """Replace categorical columns by numeric label codes."""
        X = d.X.copy()
        cols = []
        for j, col in enumerate(d.schema.feature_columns):
            if col.name not in self.codes:
                if col.is_categorical:
                    raise PreprocessError(f"no encoding fitted for categorical column {col.name!r}")
                cols.append(col)
                continue
            v = X[:, j]
            present = ~np.isnan(v)
            ids = v[present].astype(np.int64)
            mapping = {i: self.encode_value(col.name, col.categories[i]) for i in np.unique(ids)}
            v[present] = [mapping[i] for i in ids]
            cols.append(Column(col.name, Kind.NUMERIC))
        return Dataset(d.schema.with_features(cols), X, d.y, d.weights)

    def to_dict(self) -> dict:
        return {"codes": self.codes}

    @classmethod
    def from_dict(cls, d: dict) -> "EncodingMap":
        return cls({k: dict(v) for k, v in d["codes"].items()})


def fit_encoder(d: Dataset) -> EncodingMap:
    codes = {}
    for j, col in enumerate(d.schema.feature_columns):
        if not col.is_categorical:
            continue
        seen: dict[str, int] = {}
        for v in d.X[:, j]:
            if not math.isnan(v):
                text = col.categories[int(v)]
                if text not in seen:
                    seen[text] = len(seen)
        for text in col.categories:  # categories declared but absent from rows
            seen.setdefault(text, len(seen))
        codes[col.name] = seen
    return EncodingMap(codes)


# ---------------------------------------------------------------------------
# Normalization


OUTLIER_Z = 3.0
EXTREME_Z = 6.0


@dataclass
class NormalizerParams:
    method: str  # "ZScore" or "MinMax"
    stats: dict  # column -> (a, b): (mean, std) or (min, max)
    constant: list

    def transform(self, d: Dataset) -> Dataset:
        X = d.X.copy()
        for j, name in enumerate(d.schema.feature_names):
            if name not in self.stats:
                continue
            a, b = self.stats[name]
            if name in self.constant:
                X[:, j] = np.where(np.isnan(X[:, j]), np.nan, 0.0)
            elif self.method == "ZScore":
                X[:, j] = (X[:, j] - a) / b
            else:
                X[:, j] = (X[:, j] - a) / (b - a)
        return Dataset(d.schema, X, d.y, d.weights)

    def transform_values(self, names, values) -> tuple:
        out = list(values)
        for j, name in enumerate(names):
            if name not in self.stats or math.isnan(out[j]):
                continue
            a, b = self.stats[name]
            if name in self.constant:
                out[j] = 0.0
            elif self.method == "ZScore":
                out[j] = (out[j] - a) / b
            else:
                out[j] = (out[j] - a) / (b - a)
        return tuple(out)

    def to_dict(self) -> dict:
        return {"method": self.method, "stats": {k: list(v) for k, v in self.stats.items()},
                "constant": list(self.constant)}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizerParams":
        return cls(d["method"], {k: tuple(v) for k, v in d["stats"].items()}, list(d["constant"]))


def outlier_fraction(v: np.ndarray, z: float = OUTLIER_Z) -> float:
    v = v[~np.isnan(v)]
    if v.size == 0:
        return 0.0
    sd = v.std()
    if sd == 0:
        return 0.0
    return float(np.mean(np.abs(v - v.mean()) > z * sd))


def choose_normalization(d: Dataset, outlier_threshold: float = 0.01) -> str:
    """ZScore when outliers are frequent or extreme in any numeric column, else MinMax.

    A column is outlier-heavy when more than ``outlier_threshold`` of its
    values lie beyond 3 standard deviations, or when any value lies beyond 6.
    """
    for j, col in enumerate(d.schema.feature_columns):
        if col.is_categorical:
            continue
        v = d.X[:, j]
        if outlier_fraction(v) > outlier_threshold or outlier_fraction(v, EXTREME_Z) > 0:
            return "ZScore"
    return "MinMax"


def fit_normalizer(d: Dataset, method: str = "Auto", outlier_threshold: float = 0.01) -> NormalizerParams:
    key = {"auto": "Auto", "zscore": "ZScore", "minmax": "MinMax"}.get(method.lower())
    if key is None:
        raise PreprocessError(f"unknown normalization method {method!r}")
    if np.isnan(d.X).any():
        raise PreprocessError("normalizer needs a dataset without missing cells")
    if key == "Auto":
        key = choose_normalization(d, outlier_threshold)
    stats, constant = {}, []
    for j, col in enumerate(d.schema.feature_columns):
        if col.is_categorical:
            continue
        v = d.X[:, j]
        if v.size == 0:
            stats[col.name] = (0.0, 1.0)
            constant.append(col.name)
            continue
        if key == "ZScore":
            a, b = float(v.mean()), float(v.std())
            if b == 0:
                constant.append(col.name)
        else:
            a, b = float(v.min()), float(v.max())
            if b == a:
                constant.append(col.name)
        stats[col.name] = (a, b)
    return NormalizerParams(key, stats, constant)


# ---------------------------------------------------------------------------
# SMOTE balancing


@dataclass(frozen=True)
class BalancePolicy:
    trigger_ratio: float = 0.5
    smote_k: int = 5
    target: str = "Equalize"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.trigger_ratio <= 1:
            raise PreprocessError("trigger_ratio must lie in (0, 1]")
        if self.smote_k < 1:
            raise PreprocessError("smote_k must be >= 1")
        if self.target != "Equalize":
            raise PreprocessError("only the Equalize target is supported")


def imbalance_ratio(d: Dataset) -> float:
    """Smallest over largest non-empty class count."""
    counts = d.class_counts()
    counts = counts[counts > 0]
    return float(counts.min() / counts.max()) if counts.size else 1.0


def smote_point(x: np.ndarray, neighbor: np.ndarray, u: float) -> np.ndarray:
    """Interpolate ``x + u * (neighbor - x)``."""
    return x + u * (neighbor - x)


def _neighbor_space(X: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    Z = X[:, numeric]
    lo, hi = Z.min(axis=0), Z.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (Z - lo) / span


def smote_balance(d: Dataset, policy: BalancePolicy | None = None, return_pairs: bool = False):
    """Oversample every smaller class up to the majority count.

    Only applied when ``imbalance_ratio(d) < policy.trigger_ratio``. Synthetic
    rows are appended after all original rows. With ``return_pairs`` the
    (seed row, neighbor row) indices used for each synthetic row are returned
    alongside the dataset.
    """
    policy = policy or BalancePolicy()
    if not d.is_labeled:
        raise PreprocessError("SMOTE needs a labeled dataset")
    if np.isnan(d.X).any():
        raise PreprocessError("SMOTE needs a dataset without missing cells")
    counts = d.class_counts()
    pairs: list[tuple[int, int]] = []
    if imbalance_ratio(d) >= policy.trigger_ratio:
        return (d, pairs) if return_pairs else d
    rng = np.random.default_rng(policy.seed)
    numeric = ~d.schema.categorical_mask
    space = _neighbor_space(d.X, numeric)
    target = counts.max()
    new_X, new_y = [], []
    for c in range(len(counts)):
        need = int(target - counts[c])
        if need <= 0 or counts[c] == 0:
            continue
        members = np.flatnonzero(d.y == c)
        if members.size < 2:
            raise PreprocessError(f"class {d.schema.class_labels[c]!r} has fewer than 2 samples")
        k = policy.smote_k
        if k > members.size - 1:
            warnings.warn(f"smote_k={k} clamped to {members.size - 1} for class {d.schema.class_labels[c]!r}")
            k = members.size - 1
        pts = space[members]
        dist = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(dist, np.inf)
        nbrs = np.argsort(dist, axis=1, kind="stable")[:, :k]
        for _ in range(need):
            a = int(rng.integers(members.size))
            b = int(nbrs[a, rng.integers(k)])
            u = float(rng.random())
            x = d.X[members[a]]
            row = x.copy()
            row[numeric] = smote_point(x[numeric], d.X[members[b]][numeric], u)
            new_X.append(row)
            new_y.append(c)
            pairs.append((int(members[a]), int(members[b])))
    if not new_X:
        return (d, pairs) if return_pairs else d
    X = np.vstack([d.X, np.array(new_X)])
    y = np.concatenate([d.y, np.array(new_y, dtype=np.int64)])
    w = np.concatenate([d.weights, np.ones(len(new_y))])
    out = Dataset(d.schema, X, y, w)
    return (out, pairs) if return_pairs else out


# ---------------------------------------------------------------------------
# Bundled fitted preprocessor


@dataclass
class FittedPreprocessor:
    """Serializable bundle of fitted imputer, encoder and normalizer."""

    imputer: Imputer | None = None
    encoder: EncodingMap | None = None
    normalizer: NormalizerParams | None = None

    def transform(self, d: Dataset) -> Dataset:
        if self.imputer is not None:
            d = self.imputer.transform(d)
        if self.encoder is not None:
            d = self.encoder.transform(d)
        if self.normalizer is not None:
            d = self.normalizer.transform(d)
        return d

    def to_dict(self) -> dict:
        return {
            "imputer": None if self.imputer is None else self.imputer.to_dict(),
            "encoder": None if self.encoder is None else self.encoder.to_dict(),
            "normalizer": None if self.normalizer is None else self.normalizer.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "FittedPreprocessor":
        return cls(
            None if d.get("imputer") is None else Imputer.from_dict(d["imputer"]),
            None if d.get("encoder") is None else EncodingMap.from_dict(d["encoder"]),
            None if d.get("normalizer") is None else NormalizerParams.from_dict(d["normalizer"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "FittedPreprocessor":
        return cls.from_dict(json.loads(text))
