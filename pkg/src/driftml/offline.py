"""Batch classifiers: Naive Bayes, k-nearest neighbours, CART and random forest.

All classifiers share the same surface: ``fit(dataset)``, ``predict_proba``
and ``predict`` for a single instance, plus the vectorised
``predict_proba_many`` / ``predict_many`` over a feature matrix. Ties always
resolve to the lowest class id (``np.argmax`` semantics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DriftMLError, NotFittedError
from .stream import Dataset, Instance

SIGMA_FLOOR = 1e-9
_LOG_2PI = math.log(2.0 * math.pi)


def _values(x) -> np.ndarray:
    if isinstance(x, Instance):
        x = x.values
    return np.asarray(x, dtype=float)


class Classifier:
    n_classes: int

    def fit(self, d: Dataset) -> "Classifier":  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_proba_many(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_proba(self, x) -> np.ndarray:
        return self.predict_proba_many(_values(x)[None, :])[0]

    def predict(self, x) -> int:
        return int(np.argmax(self.predict_proba(x)))

    def predict_many(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba_many(X), axis=1)


def normalize_log_posterior(log_joint: np.ndarray) -> np.ndarray:
    """Softmax over classes; ``-inf`` entries (impossible classes) map to 0."""
    log_joint = np.atleast_2d(log_joint)
    top = log_joint.max(axis=1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    p = np.exp(log_joint - top)
    return p / p.sum(axis=1, keepdims=True)


def nb_log_joint(x: np.ndarray, class_counts, means, variances, cat_counts, categorical, alpha,
                 n_categories) -> np.ndarray:
    """Unnormalised log P(c) + sum_i log P(x_i | c) for one row.

    ``means``/``variances`` are (C, F) arrays (ignored for categorical
    features); ``cat_counts[j]`` is a (C, K_j) array for categorical feature
    ``j``. Missing features are skipped. Classes never observed get ``-inf``,
    unless no class was observed at all (uniform prior).
    """
    counts = np.asarray(class_counts, dtype=float)
    total = counts.sum()
    C = counts.size
    if total == 0:
        return np.zeros(C)
    seen = counts > 0
    out = np.full(C, -np.inf)
    out[seen] = np.log(counts[seen] / total)
    for j, v in enumerate(x):
        if math.isnan(v):
            continue
        if categorical[j]:
            K = n_categories[j]
            table = cat_counts[j]
            k = int(v)
            num = (table[:, k] if k < table.shape[1] else np.zeros(C)) + alpha
            den = counts + alpha * K
            with np.errstate(divide="ignore", invalid="ignore"):
                lik = np.where(den > 0, num / den, 0.0)
            with np.errstate(divide="ignore"):
                out[seen] += np.log(lik[seen])
        else:
            sd = np.maximum(np.sqrt(variances[:, j]), SIGMA_FLOOR)
            z = (v - means[:, j]) / sd
            out[seen] += (-0.5 * (_LOG_2PI + z * z) - np.log(sd))[seen]
    return out


class NaiveBayes(Classifier):
    """Gaussian likelihoods for numeric features, additive smoothing for categorical ones."""

    def __init__(self, alpha: float = 1.0):
        self.alpha = alpha
        self._fitted = False

    def fit(self, d: Dataset) -> "NaiveBayes":
        schema = d.schema
        C, F = schema.n_classes, schema.n_features
        self.n_classes = C
        self.categorical = schema.categorical_mask
        self.n_categories = [len(c.categories) for c in schema.feature_columns]
        self.class_counts = np.bincount(d.y, minlength=C).astype(float)
        self.means = np.zeros((C, F))
        self.variances = np.zeros((C, F))
        self.cat_counts = {}
        for j in range(F):
            col = d.X[:, j]
            if self.categorical[j]:
                table = np.zeros((C, self.n_categories[j]))
                ok = ~np.isnan(col)
                np.add.at(table, (d.y[ok], col[ok].astype(np.int64)), 1.0)
                self.cat_counts[j] = table
                continue
            for c in range(C):
                v = col[(d.y == c) & ~np.isnan(col)]
                if v.size:
                    self.means[c, j] = v.mean()
                    self.variances[c, j] = v.var()
        self._fitted = True
        return self

    def log_joint(self, x) -> np.ndarray:
        if not self._fitted:
            raise NotFittedError("NaiveBayes used before fit")
        return nb_log_joint(_values(x), self.class_counts, self.means, self.variances,
                            self.cat_counts, self.categorical, self.alpha, self.n_categories)

    def predict_proba_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return normalize_log_posterior(np.array([self.log_joint(x) for x in X]))


class KNN(Classifier):
    """Majority vote among the k Euclidean-nearest training rows.

    Distance ties go to the lower row index, vote ties to the lower class id.
    ``predict_proba`` returns vote fractions.
    """

    def __init__(self, n_neighbors: int = 5):
        self.n_neighbors = n_neighbors
        self._X = None

    def fit(self, d: Dataset) -> "KNN":
        if len(d) == 0:
            raise DriftMLError("KNN needs a non-empty training set")
        self._X = np.asarray(d.X, dtype=float)
        self._y = np.asarray(d.y)
        self.n_classes = d.schema.n_classes
        return self

    def predict_proba_many(self, X) -> np.ndarray:
        if self._X is None:
            raise NotFittedError("KNN used before fit")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        k = min(self.n_neighbors, len(self._X))
        out = np.zeros((len(X), self.n_classes))
        for start in range(0, len(X), 256):
            block = X[start:start + 256]
            D = ((block[:, None, :] - self._X[None, :, :]) ** 2).sum(axis=2)
            nearest = np.argsort(D, axis=1, kind="stable")[:, :k]
            votes = self._y[nearest]
            for c in range(self.n_classes):
                out[start:start + len(block), c] = (votes == c).sum(axis=1)
        return out / k


def knn_predict(k: int, train: Dataset, x) -> int:
    return KNN(k).fit(train).predict(x)


# ---------------------------------------------------------------------------
# CART


@dataclass(frozen=True)
class DTParams:
    criterion: str = "gini"
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: object = None  # None/"all", "sqrt", or an int count
    ccp_alpha: float = 0.0

    def __post_init__(self):
        if self.criterion not in ("gini", "entropy"):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.min_samples_split < 2 or self.min_samples_leaf < 1:
            raise ValueError("min_samples_split >= 2 and min_samples_leaf >= 1 required")
        if self.ccp_alpha < 0:
            raise ValueError("ccp_alpha must be non-negative")

    def n_split_features(self, F: int) -> int:
        m = self.max_features
        if m is None or m == "all":
            return F
        if m == "sqrt":
            return max(1, int(math.ceil(math.sqrt(F))))
        return max(1, min(F, int(m)))


def _impurity(counts: np.ndarray, criterion: str) -> np.ndarray:
    """Row-wise impurity of class-count arrays (last axis = classes)."""
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
        if criterion == "gini":
            return 1.0 - (p * p).sum(axis=-1)
        logp = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
        return -(p * logp).sum(axis=-1)


class DecisionTree(Classifier):
    """Greedy CART with optional minimal cost-complexity pruning.

    Thresholds are midpoints between sorted distinct values; categorical
    features use one-vs-rest equality tests. Growth stops at ``max_depth``,
    when a node holds fewer than ``min_samples_split`` rows, or when it is
    pure. Pruning repeatedly collapses the weakest link while its effective
    alpha does not exceed ``ccp_alpha``, the risk being the training
    misclassification rate.
    """

    def __init__(self, params: DTParams | None = None, seed: int = 0, rng=None, **kwargs):
        self.params = replace(params or DTParams(), **kwargs) if kwargs else (params or DTParams())
        self.seed = seed
        self._rng = rng
        self._fitted = False

    # tree arrays are python lists while growing
    def fit(self, d: Dataset, sample_weight=None) -> "DecisionTree":
        self.n_classes = d.schema.n_classes
        self.categorical = d.schema.categorical_mask
        rng = self._rng if self._rng is not None else np.random.default_rng(self.seed)
        X = np.asarray(d.X, dtype=float)
        y = np.asarray(d.y)
        w = np.asarray(d.weights if sample_weight is None else sample_weight, dtype=float)
        self.feature, self.threshold, self.is_equality = [], [], []
        self.left, self.right, self.value, self.weight, self.depth = [], [], [], [], []
        self._m = self.params.n_split_features(X.shape[1])
        self._grow(X, y, w, np.arange(len(y)), 0, rng)
        self.total_weight = float(w.sum())
        if self.params.ccp_alpha > 0:
            self._prune(self.params.ccp_alpha)
        self._finalize()
        self._fitted = True
        return self

    def _new_node(self, counts, depth) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.is_equality.append(False)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(counts)
        self.weight.append(float(counts.sum()))
        self.depth.append(depth)
        return len(self.feature) - 1

    def _grow(self, X, y, w, idx, depth, rng) -> int:
        counts = np.bincount(y[idx], weights=w[idx], minlength=self.n_classes)
        node = self._new_node(counts, depth)
        p = self.params
        if (
            (p.max_depth is not None and depth >= p.max_depth)
            or len(idx) < p.min_samples_split
            or np.count_nonzero(counts) <= 1
        ):
            return node
        split = self._best_split(X, y, w, idx, counts, rng)
        if split is None:
            return node
        j, thr, equality = split
        col = X[idx, j]
        go_left = (col == thr) if equality else (col <= thr)
        self.feature[node] = j
        self.threshold[node] = thr
        self.is_equality[node] = equality
        left = self._grow(X, y, w, idx[go_left], depth + 1, rng)
        right = self._grow(X, y, w, idx[~go_left], depth + 1, rng)
        self.left[node] = left
        self.right[node] = right
        return node

    def _best_split(self, X, y, w, idx, counts, rng):
        F = X.shape[1]
        feats = np.arange(F) if self._m >= F else np.sort(rng.choice(F, self._m, replace=False))
        crit = self.params.criterion
        min_leaf = self.params.min_samples_leaf
        parent = float(_impurity(counts, crit))
        total = counts.sum()
        best_gain, best = -np.inf, None
        Y = np.zeros((len(idx), self.n_classes))
        Y[np.arange(len(idx)), y[idx]] = w[idx]
        for j in feats:
            col = X[idx, j]
            if self.categorical[j]:
                for v in np.unique(col[~np.isnan(col)]):
                    mask = col == v
                    nl = int(mask.sum())
                    if nl < min_leaf or len(idx) - nl < min_leaf:
                        continue
                    lc = Y[mask].sum(axis=0)
                    rc = counts - lc
                    child = (lc.sum() * _impurity(lc, crit) + rc.sum() * _impurity(rc, crit)) / total
                    gain = parent - child
                    if gain > best_gain + 1e-12:
                        best_gain, best = gain, (int(j), float(v), True)
                continue
            order = np.argsort(col, kind="stable")
            sv = col[order]
            cum = np.cumsum(Y[order], axis=0)
            n = len(sv)
            pos = np.arange(1, n)  # split between pos-1 and pos
            valid = (sv[1:] != sv[:-1]) & (pos >= min_leaf) & (n - pos >= min_leaf)
            if not valid.any():
                continue
            pos = pos[valid]
            lc = cum[pos - 1]
            rc = counts[None, :] - lc
            wl, wr = lc.sum(axis=1), rc.sum(axis=1)
            child = (wl * _impurity(lc, crit) + wr * _impurity(rc, crit)) / total
            gains = parent - child
            k = int(np.argmax(gains))
            if gains[k] > best_gain + 1e-12:
                best_gain = float(gains[k])
                best = (int(j), float((sv[pos[k] - 1] + sv[pos[k]]) / 2.0), False)
        return best

    # -- pruning ---------------------------------------------------------
    def _subtree(self, node):
        """(misclassified weight of the subtree's leaves, leaf count)."""
        if self.left[node] < 0:
            c = self.value[node]
            return float(c.sum() - c.max()), 1
        el, nl = self._subtree(self.left[node])
        er, nr = self._subtree(self.right[node])
        return el + er, nl + nr

    def _prune(self, alpha: float):
        N = self.total_weight
        while True:
            best_g, best_node = np.inf, None
            stack = [0]
            while stack:
                node = stack.pop()
                if self.left[node] < 0:
                    continue
                c = self.value[node]
                r_node = (c.sum() - c.max()) / N
                err, leaves = self._subtree(node)
                g = (r_node - err / N) / (leaves - 1)
                if g < best_g - 1e-15:
                    best_g, best_node = g, node
                stack.extend([self.right[node], self.left[node]])
            if best_node is None or best_g > alpha:
                break
            self.left[best_node] = -1
            self.right[best_node] = -1
            self.feature[best_node] = -1

    def _finalize(self):
        """Compact reachable nodes into numpy arrays."""
        keep, remap = [], {}
        stack = [0]
        while stack:
            node = stack.pop()
            remap[node] = len(keep)
            keep.append(node)
            if self.left[node] >= 0:
                stack.extend([self.right[node], self.left[node]])
        self.feature_ = np.array([self.feature[k] for k in keep], dtype=np.int64)
        self.threshold_ = np.array([self.threshold[k] for k in keep])
        self.is_equality_ = np.array([self.is_equality[k] for k in keep], dtype=bool)
        self.left_ = np.array([remap.get(self.left[k], -1) if self.left[k] >= 0 else -1 for k in keep])
        self.right_ = np.array([remap.get(self.right[k], -1) if self.right[k] >= 0 else -1 for k in keep])
        vals = np.array([self.value[k] for k in keep], dtype=float)
        tot = vals.sum(axis=1, keepdims=True)
        self.proba_ = np.where(tot > 0, vals / np.where(tot > 0, tot, 1.0), 1.0 / self.n_classes)
        self.depth_ = np.array([self.depth[k] for k in keep])

    @property
    def n_leaves(self) -> int:
        return int((self.left_ < 0).sum())

    @property
    def n_nodes(self) -> int:
        return len(self.feature_)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        if not self._fitted:
            raise NotFittedError("DecisionTree used before fit")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            internal = self.left_[node] >= 0
            if not internal.any():
                return node
            r = rows[internal]
            nd = node[internal]
            v = X[r, self.feature_[nd]]
            thr = self.threshold_[nd]
            go_left = np.where(self.is_equality_[nd], v == thr, v <= thr)
            node[internal] = np.where(go_left, self.left_[nd], self.right_[nd])

    def predict_proba_many(self, X) -> np.ndarray:
        return self.proba_[self.apply(X)]


def cart_fit(d: Dataset, params: DTParams | None = None, seed: int = 0) -> DecisionTree:
    return DecisionTree(params, seed=seed).fit(d)


@dataclass(frozen=True)
class RFParams:
    n_estimators: int = 100
    tree: DTParams = DTParams(max_features="sqrt")
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")


class RandomForest(Classifier):
    """Bagged CART trees; probabilities are the mean of the trees' vectors.

    Tree ``i`` draws its bootstrap sample and feature subsets from the
    ``i``-th child of ``SeedSequence(seed)``, so the result does not depend
    on training order.
    """

    def __init__(self, params: RFParams | None = None):
        self.params = params or RFParams()
        self.trees: list[DecisionTree] = []

    def fit(self, d: Dataset) -> "RandomForest":
        p = self.params
        self.n_classes = d.schema.n_classes
        children = np.random.SeedSequence(p.seed).spawn(p.n_estimators)
        self.trees = []
        n = len(d)
        for ss in children:
            rng = np.random.default_rng(ss)
            if p.bootstrap:
                draws = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
                weights = draws * d.weights
                keep = np.flatnonzero(draws > 0)
                sub = d.subset(keep)
                tree = DecisionTree(p.tree, rng=rng).fit(sub, sample_weight=weights[keep])
            else:
                tree = DecisionTree(p.tree, rng=rng).fit(d)
            self.trees.append(tree)
        return self

    def predict_proba_many(self, X) -> np.ndarray:
        if not self.trees:
            raise NotFittedError("RandomForest used before fit")
        return np.mean([t.predict_proba_many(X) for t in self.trees], axis=0)


def rf_fit(d: Dataset, params: RFParams | None = None) -> RandomForest:
    return RandomForest(params).fit(d)
