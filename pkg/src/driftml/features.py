"""Filter feature selection: information-gain relevance then Pearson redundancy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DriftMLError, SchemaError
from .stream import Dataset

DEFAULT_BINS = 10


@dataclass(frozen=True)
class FeatureScores:
    """(feature, score) pairs, descending by score, ties kept in column order."""

    items: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if any(s < 0 for _, s in self.items):
            raise ValueError("feature scores must be non-negative")

    @classmethod
    def from_mapping(cls, names, scores) -> "FeatureScores":
        order = sorted(range(len(names)), key=lambda i: (-scores[i], i))
        return cls(tuple((names[i], float(scores[i])) for i in order))

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.items]

    def score(self, name: str) -> float:
        return dict(self.items)[name]

    def __len__(self):
        return len(self.items)


@dataclass(frozen=True)
class TopK:
    k: int


@dataclass(frozen=True)
class CumulativeImportance:
    fraction: float


@dataclass
class SelectionReport:
    kept: list[str]
    dropped_irrelevant: list[tuple[str, float]] = field(default_factory=list)
    dropped_redundant: list[tuple[str, str, float]] = field(default_factory=list)
    thresholds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kept": list(self.kept),
            "dropped_irrelevant": [[n, s] for n, s in self.dropped_irrelevant],
            "dropped_redundant": [[a, b, r] for a, b, r in self.dropped_redundant],
            "thresholds": dict(self.thresholds),
        }


def _entropy_from_counts(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def information_gain_from_table(table) -> float:
    """IG in bits for a contingency table with rows = feature values, cols = classes."""
    table = np.asarray(table, dtype=float)
    n = table.sum()
    if n == 0:
        return 0.0
    h_y = _entropy_from_counts(table.sum(axis=0))
    h_y_given_x = sum(row.sum() / n * _entropy_from_counts(row) for row in table)
    return max(0.0, h_y - h_y_given_x)


def equal_frequency_bins(v: np.ndarray, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Bin index per value; missing values get their own bin ``-1``."""
    out = np.full(v.shape, -1, dtype=np.int64)
    present = ~np.isnan(v)
    if not present.any():
        return out
    edges = np.unique(np.quantile(v[present], np.linspace(0, 1, n_bins + 1)[1:-1]))
    out[present] = np.searchsorted(edges, v[present], side="right")
    return out


def _discretize(d: Dataset, j: int, n_bins: int) -> np.ndarray:
    v = d.X[:, j]
    if d.schema.feature_columns[j].is_categorical:
        return np.where(np.isnan(v), -1, v).astype(np.int64)
    return equal_frequency_bins(v, n_bins)


def information_gain(d: Dataset, feature: str, n_bins: int = DEFAULT_BINS) -> float:
    """H(Y) - H(Y | X) in bits, continuous X binned by equal frequency."""
    if not d.is_labeled:
        raise SchemaError("information gain needs a labeled dataset")
    j = d.schema.feature_index(feature)
    codes = _discretize(d, j, n_bins)
    _, x_idx = np.unique(codes, return_inverse=True)
    table = np.zeros((x_idx.max() + 1 if x_idx.size else 0, d.schema.n_classes))
    np.add.at(table, (x_idx, d.y), 1.0)
    return information_gain_from_table(table)


def feature_scores(d: Dataset, n_bins: int = DEFAULT_BINS) -> FeatureScores:
    names = d.schema.feature_names
    return FeatureScores.from_mapping(names, [information_gain(d, n, n_bins) for n in names])


def select_by_ig(scores: FeatureScores, policy) -> list[str]:
    if len(scores) == 0:
        raise ValueError("no feature scores to select from")
    if isinstance(policy, TopK):
        if policy.k > len(scores):
            raise ValueError(f"TopK({policy.k}) exceeds the {len(scores)} available features")
        return scores.names[: policy.k]
    if isinstance(policy, CumulativeImportance):
        total = sum(s for _, s in scores.items)
        if total == 0:
            return scores.names
        goal = policy.fraction * total
        acc = 0.0
        kept = []
        for name, s in scores.items:
            kept.append(name)
            acc += s
            # relative slack absorbs float summation error at the boundary
            if acc >= goal * (1 - 1e-12):
                break
        return kept
    raise TypeError(f"unknown selection policy {policy!r}")


def pearson_r(x, y, return_flag: bool = False):
    """Sample correlation coefficient; 0 (flagged) when either column is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("pearson_r needs equal-length columns")
    if x.size < 2:
        raise ValueError("pearson_r needs at least 2 values")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        return (0.0, True) if return_flag else 0.0
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    r = min(1.0, max(-1.0, r))
    return (r, False) if return_flag else r


def drop_redundant(d: Dataset, scores: FeatureScores, r_threshold: float = 0.9,
                   features=None) -> SelectionReport:
    """Greedy pruning of strongly correlated feature pairs.

    Pairs are visited by descending |r|; of a pair with |r| >= threshold whose
    members are both still kept, the lower-scored one is dropped (ties drop the
    later column).
    """
    if not 0 < r_threshold <= 1:
        raise ValueError("r_threshold must lie in (0, 1]")
    names = list(features) if features is not None else d.schema.feature_names
    order = {n: i for i, n in enumerate(d.schema.feature_names)}
    names.sort(key=order.__getitem__)
    cols = {n: d.feature(n) for n in names}
    pairs = []
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            xa, xb = cols[names[a]], cols[names[b]]
            mask = ~(np.isnan(xa) | np.isnan(xb))
            if mask.sum() < 2:
                continue
            r = pearson_r(xa[mask], xb[mask])
            pairs.append((abs(r), a, b, r))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    kept = set(names)
    dropped = []
    for absr, a, b, r in pairs:
        if absr < r_threshold:
            break
        na, nb = names[a], names[b]
        if na not in kept or nb not in kept:
            continue
        sa, sb = scores.score(na), scores.score(nb)
        loser, winner = (nb, na) if sa >= sb else (na, nb)
        kept.discard(loser)
        dropped.append((loser, winner, r))
    return SelectionReport(
        kept=[n for n in names if n in kept],
        dropped_redundant=dropped,
        thresholds={"r_threshold": r_threshold},
    )


def auto_feature_selection(d: Dataset, ig_policy=None, r_threshold: float = 0.9,
                           use_ig: bool = True, use_pearson: bool = True,
                           n_bins: int = DEFAULT_BINS) -> tuple[SelectionReport, FeatureScores]:
    """IG relevance filter followed by redundancy pruning among the survivors."""
    if d.schema.n_features == 0:
        raise DriftMLError("dataset has no features to select")
    ig_policy = ig_policy or CumulativeImportance(0.9)
    scores = feature_scores(d, n_bins)
    kept = scores.names
    irrelevant = []
    if use_ig:
        kept = select_by_ig(scores, ig_policy)
        irrelevant = [(n, s) for n, s in scores.items if n not in kept]
    report = SelectionReport(kept=list(kept), dropped_irrelevant=irrelevant)
    if use_pearson and len(kept) > 1:
        red = drop_redundant(d, scores, r_threshold, features=kept)
        report.kept = red.kept
        report.dropped_redundant = red.dropped_redundant
    order = {n: i for i, n in enumerate(d.schema.feature_names)}
    report.kept.sort(key=order.__getitem__)
    report.thresholds = {
        "ig_policy": _policy_dict(ig_policy) if use_ig else None,
        "r_threshold": r_threshold if use_pearson else None,
        "n_bins": n_bins,
    }
    return report, scores


def _policy_dict(policy) -> dict:
    if isinstance(policy, TopK):
        return {"TopK": policy.k}
    return {"CumulativeImportance": policy.fraction}


def parse_ig_policy(spec) -> object:
    if spec is None:
        return CumulativeImportance(0.9)
    if isinstance(spec, (TopK, CumulativeImportance)):
        return spec
    if "TopK" in spec:
        return TopK(int(spec["TopK"]))
    if "CumulativeImportance" in spec:
        return CumulativeImportance(float(spec["CumulativeImportance"]))
    raise ValueError(f"unknown IG policy {spec!r}")
