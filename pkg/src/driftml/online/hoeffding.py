"""Hoeffding trees: the VFDT-style learner and an EFDT-style variant.

Leaves keep class counts plus one observer per candidate feature. Numeric
observers hold a Gaussian summary per class and evaluate a fixed grid of
candidate thresholds; categorical observers hold per-class value counts and
propose one-vs-rest equality splits. Split merit is information gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..stream import Instance, Schema
from .base import OnlineClassifier, normalize
from .bayes import GaussianEstimator

_SQRT2 = math.sqrt(2.0)
_LOG_2PI = math.log(2.0 * math.pi)


def hoeffding_bound(value_range: float, delta: float, n: float) -> float:
    """epsilon = sqrt(R^2 ln(1/delta) / (2n))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return math.sqrt(value_range * value_range * math.log(1.0 / delta) / (2.0 * n))


@dataclass(frozen=True)
class HTParams:
    grace_period: float = 200
    split_confidence: float = 1e-7
    tie_threshold: float = 0.05
    max_depth: int | None = None
    leaf_prediction: str = "NaiveBayes"
    n_thresholds: int = 10
    min_branch_fraction: float = 0.01

    def __post_init__(self):
        if not 0 < self.split_confidence < 1:
            raise ValueError("split_confidence must lie in (0, 1)")
        if not 0 <= self.tie_threshold < 1:
            raise ValueError("tie_threshold must lie in [0, 1)")
        if self.grace_period <= 0:
            raise ValueError("grace_period must be positive")
        if self.leaf_prediction not in ("MajorityClass", "NaiveBayes"):
            raise ValueError(f"unknown leaf_prediction {self.leaf_prediction!r}")


def _entropy(dist) -> float:
    total = sum(dist)
    if total <= 0:
        return 0.0
    h = 0.0
    for c in dist:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


def info_gain(pre, branches, min_fraction: float = 0.0) -> float:
    """Information gain of splitting ``pre`` into ``branches`` (class-count lists)."""
    total = sum(sum(b) for b in branches)
    if total <= 0:
        return 0.0
    if min_fraction > 0:
        big = sum(1 for b in branches if sum(b) / total >= min_fraction)
        if big < 2:
            return -math.inf
    return _entropy(pre) - sum(sum(b) / total * _entropy(b) for b in branches)


class Split:
    """A binary test on one feature: ``x <= threshold`` or ``x == value``."""

    __slots__ = ("feature", "threshold", "equality", "merit", "branches")

    def __init__(self, feature, threshold, equality, merit, branches):
        self.feature = feature
        self.threshold = threshold
        self.equality = equality
        self.merit = merit
        self.branches = branches

    def goes_left(self, v: float) -> bool:
        return v == self.threshold if self.equality else v <= self.threshold


class NumericObserver:
    __slots__ = ("per_class",)

    def __init__(self, n_classes):
        self.per_class = [GaussianEstimator() for _ in range(n_classes)]

    def update(self, v, c, w):
        self.per_class[c].update(v, w)

    def best_split(self, j, pre, n_thresholds, min_fraction) -> Split | None:
        lo = min(e.min for e in self.per_class)
        hi = max(e.max for e in self.per_class)
        if not lo < hi:
            return None
        best = None
        for k in range(1, n_thresholds + 1):
            t = lo + (hi - lo) * k / (n_thresholds + 1)
            left, right = [], []
            for e in self.per_class:
                if e.weight <= 0:
                    lw = 0.0
                elif t < e.min:
                    lw = 0.0
                elif t >= e.max:
                    lw = e.weight
                else:
                    sd = e.std
                    if sd <= 0:
                        lw = e.weight if e.mean <= t else 0.0
                    else:
                        lw = e.weight * 0.5 * math.erfc(-(t - e.mean) / (sd * _SQRT2))
                left.append(lw)
                right.append(e.weight - lw)
            merit = info_gain(pre, [left, right], min_fraction)
            if best is None or merit > best.merit:
                best = Split(j, t, False, merit, (left, right))
        return best

    def log_likelihood(self, v, c) -> float:
        e = self.per_class[c]
        if e.weight <= 0:
            return 0.0
        sd = max(e.std, 1e-9)
        z = (v - e.mean) / sd
        return -0.5 * (_LOG_2PI + z * z) - math.log(sd)


class NominalObserver:
    __slots__ = ("counts", "n_classes")

    def __init__(self, n_classes):
        self.n_classes = n_classes
        self.counts: dict[float, list] = {}

    def update(self, v, c, w):
        row = self.counts.get(v)
        if row is None:
            row = self.counts[v] = [0.0] * self.n_classes
        row[c] += w

    def best_split(self, j, pre, n_thresholds, min_fraction) -> Split | None:
        if len(self.counts) < 2:
            return None
        best = None
        for v in sorted(self.counts):
            left = list(self.counts[v])
            right = [p - l for p, l in zip(pre, left)]
            merit = info_gain(pre, [left, right], min_fraction)
            if best is None or merit > best.merit:
                best = Split(j, v, True, merit, (left, right))
        return best

    def log_likelihood(self, v, c) -> float:
        total = sum(row[c] for row in self.counts.values())
        k = len(self.counts) + 1
        num = self.counts.get(v, [0.0] * self.n_classes)[c] + 1.0
        return math.log(num / (total + k))


class Node:
    """Leaf when ``split`` is None; internal nodes keep statistics too (EFDT)."""

    __slots__ = ("class_counts", "observers", "features", "split", "children", "depth",
                 "weight_seen", "last_eval", "created_at")

    def __init__(self, class_counts, features, depth, created_at=0):
        self.class_counts = list(class_counts)
        self.observers: dict[int, object] = {}
        self.features = features
        self.split: Split | None = None
        self.children: list | None = None
        self.depth = depth
        self.weight_seen = 0.0
        self.last_eval = 0.0
        self.created_at = created_at

    @property
    def is_leaf(self) -> bool:
        return self.split is None


class HoeffdingTree(OnlineClassifier):
    """Very Fast Decision Tree.

    Every ``grace_period`` units of weight arriving at a leaf, the leaf splits
    on the best candidate if its gain beats the runner-up (or the no-split
    option) by more than the Hoeffding bound, or if the bound has shrunk below
    ``tie_threshold``.

    Parameters
    ----------
    schema : Schema
        Fixes feature kinds and the class count.
    params : HTParams
    max_features : int, optional
        When set, each new leaf observes a random subset of this many features
        (the per-split randomisation of adaptive random forests).
    seed : int or numpy Generator
        Source of the feature-subset draws.
    """

    def __init__(self, schema: Schema, params: HTParams | None = None, max_features=None, seed=0):
        self.schema = schema
        self.params = params or HTParams()
        self.n_classes = schema.n_classes
        self.n_features = schema.n_features
        self.categorical = list(schema.categorical_mask)
        self.max_features = max_features
        self.seed = seed
        self.reset()

    def reset(self):
        self._rng = self.seed if isinstance(self.seed, np.random.Generator) else np.random.default_rng(self.seed)
        self.n_seen = 0
        self.split_log: list[tuple[int, int, int]] = []  # (instance index, depth, feature)
        self.root = self._new_leaf([0.0] * self.n_classes, 0)

    def clone(self):
        seed = self.seed if not isinstance(self.seed, np.random.Generator) else 0
        return type(self)(self.schema, self.params, self.max_features, seed)

    @property
    def _range(self) -> float:
        return math.log2(self.n_classes) if self.n_classes > 1 else 1.0

    def _new_leaf(self, counts, depth) -> Node:
        feats = None
        if self.max_features is not None and self.max_features < self.n_features:
            feats = sorted(self._rng.choice(self.n_features, self.max_features, replace=False).tolist())
        return Node(counts, feats, depth, self.n_seen)

    def _child_index(self, node: Node, x) -> int:
        v = x[node.split.feature]
        if v != v:  # missing: follow the heavier branch
            a, b = (sum(c.class_counts) for c in node.children)
            return 0 if a >= b else 1
        return 0 if node.split.goes_left(v) else 1

    def sort_to_leaf(self, x) -> Node:
        node = self.root
        while node.split is not None:
            node = node.children[self._child_index(node, x)]
        return node

    def _update_stats(self, node: Node, x, c, w):
        node.class_counts[c] += w
        node.weight_seen += w
        feats = node.features if node.features is not None else range(self.n_features)
        obs = node.observers
        for j in feats:
            v = x[j]
            if v != v:
                continue
            o = obs.get(j)
            if o is None:
                o = obs[j] = NominalObserver(self.n_classes) if self.categorical[j] else NumericObserver(self.n_classes)
            o.update(v, c, w)

    def learn_one(self, x: Instance):
        w = x.weight
        if w <= 0:
            return
        self.n_seen += 1
        values = x.values
        leaf = self._descend_and_update(values, x.label, w)
        p = self.params
        if leaf.weight_seen - leaf.last_eval >= p.grace_period:
            leaf.last_eval = leaf.weight_seen
            if sum(1 for c in leaf.class_counts if c > 0) > 1:
                self._attempt_split(leaf)

    def _descend_and_update(self, values, c, w) -> Node:
        leaf = self.sort_to_leaf(values)
        self._update_stats(leaf, values, c, w)
        return leaf

    def _candidates(self, node: Node) -> list[Split]:
        pre = node.class_counts
        out = []
        for j, o in node.observers.items():
            s = o.best_split(j, pre, self.params.n_thresholds, self.params.min_branch_fraction)
            if s is not None and s.merit > -math.inf:
                out.append(s)
        out.sort(key=lambda s: (-s.merit, s.feature))
        return out

    def _should_split(self, cands: list[Split], n: float) -> bool:
        if not cands or cands[0].merit <= 0:
            return False
        eps = hoeffding_bound(self._range, self.params.split_confidence, n)
        second = cands[1].merit if len(cands) > 1 else 0.0
        return cands[0].merit - second > eps or eps < self.params.tie_threshold

    def _attempt_split(self, leaf: Node):
        if self.params.max_depth is not None and leaf.depth >= self.params.max_depth:
            return
        cands = self._candidates(leaf)
        if self._should_split(cands, leaf.weight_seen):
            self._apply_split(leaf, cands[0])

    def _apply_split(self, node: Node, split: Split):
        node.split = split
        node.children = [self._new_leaf(b, node.depth + 1) for b in split.branches]
        self.split_log.append((self.n_seen, node.depth, split.feature))

    def _nb_proba(self, leaf: Node, x) -> np.ndarray:
        counts = leaf.class_counts
        total = sum(counts)
        logp = []
        for c in range(self.n_classes):
            if counts[c] <= 0:
                logp.append(-math.inf)
                continue
            lp = math.log(counts[c] / total)
            for j, o in leaf.observers.items():
                v = x[j]
                if v == v:
                    lp += o.log_likelihood(v, c)
            logp.append(lp)
        top = max(logp)
        p = np.array([math.exp(l - top) if l > -math.inf else 0.0 for l in logp])
        return p / p.sum()

    def predict_proba_one(self, x) -> np.ndarray:
        values = x.values if isinstance(x, Instance) else x
        leaf = self.sort_to_leaf(values)
        if sum(leaf.class_counts) <= 0:
            return np.full(self.n_classes, 1.0 / self.n_classes)
        if self.params.leaf_prediction == "NaiveBayes" and leaf.observers:
            return self._nb_proba(leaf, values)
        return normalize(leaf.class_counts)

    # -- introspection -----------------------------------------------------
    def nodes(self):
        stack = [self.root]
        while stack:
            n = stack.pop()
            yield n
            if n.children:
                stack.extend(n.children)

    @property
    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes() if n.is_leaf)

    @property
    def depth(self) -> int:
        return max(n.depth for n in self.nodes())


class EFDT(HoeffdingTree):
    """Extremely Fast Decision Tree (Hoeffding Anytime Tree).

    A leaf splits as soon as its best candidate beats the no-split option by
    the Hoeffding bound. Internal nodes keep accumulating statistics and,
    every ``grace_period`` units of weight, replace their test with a fresh
    subtree when a different feature now beats the current one by the bound.
    """

    def reset(self):
        super().reset()
        self.replacement_log: list[tuple[int, int, int, int]] = []  # (index, depth, old, new)

    def _descend_and_update(self, values, c, w) -> Node:
        node = self.root
        p = self.params
        while True:
            self._update_stats(node, values, c, w)
            if node.split is None:
                return node
            if node.weight_seen - node.last_eval >= p.grace_period:
                node.last_eval = node.weight_seen
                if self._reevaluate(node):
                    return node.children[self._child_index(node, values)]
            node = node.children[self._child_index(node, values)]

    def _should_split(self, cands, n) -> bool:
        if not cands or cands[0].merit <= 0:
            return False
        eps = hoeffding_bound(self._range, self.params.split_confidence, n)
        return cands[0].merit > eps or eps < self.params.tie_threshold

    def _reevaluate(self, node: Node) -> bool:
        """Swap the node's test if another feature now dominates; True if replaced."""
        cands = self._candidates(node)
        if not cands:
            return False
        current = next((s for s in cands if s.feature == node.split.feature), None)
        current_merit = current.merit if current is not None else 0.0
        best = cands[0]
        if best.feature == node.split.feature or best.merit <= 0:
            return False
        eps = hoeffding_bound(self._range, self.params.split_confidence, node.weight_seen)
        if best.merit - current_merit > eps:
            old = node.split.feature
            node.split = best
            node.children = [self._new_leaf(b, node.depth + 1) for b in best.branches]
            self.replacement_log.append((self.n_seen, node.depth, old, best.feature))
            return True
        return False
