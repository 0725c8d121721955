"""Incremental Naive Bayes with running Gaussian summaries."""

from __future__ import annotations

import math

import numpy as np

from ..offline import nb_log_joint, normalize_log_posterior
from ..stream import Instance, Schema
from .base import OnlineClassifier


class GaussianEstimator:
    """Weighted running mean and (population) variance."""

    __slots__ = ("weight", "mean", "m2", "min", "max")

    def __init__(self):
        self.weight = 0.0
        self.mean = 0.0
        self.m2 = 0.0
        self.min = math.inf
        self.max = -math.inf

    def update(self, x: float, w: float = 1.0):
        if w <= 0:
            return
        new_w = self.weight + w
        delta = x - self.mean
        self.mean += w * delta / new_w
        self.m2 += w * delta * (x - self.mean)
        self.weight = new_w
        if x < self.min:
            self.min = x
        if x > self.max:
            self.max = x

    @property
    def variance(self) -> float:
        return self.m2 / self.weight if self.weight > 0 else 0.0

    @property
    def std(self) -> float:
        return math.sqrt(max(self.variance, 0.0))


class IncrementalNB(OnlineClassifier):
    """Naive Bayes updated one instance at a time.

    Given the same rows, the posteriors equal those of the batch
    :class:`~driftml.offline.NaiveBayes` up to floating-point rounding.
    """

    def __init__(self, schema: Schema, alpha: float = 1.0):
        self.schema = schema
        self.n_classes = schema.n_classes
        self.alpha = alpha
        self.categorical = schema.categorical_mask
        self.n_categories = [len(c.categories) for c in schema.feature_columns]
        self.reset()

    def reset(self):
        C, F = self.n_classes, self.schema.n_features
        self.class_counts = np.zeros(C)
        self.estimators = [[GaussianEstimator() for _ in range(F)] for _ in range(C)]
        self.cat_counts = {
            j: np.zeros((C, self.n_categories[j])) for j in range(F) if self.categorical[j]
        }

    def clone(self):
        return IncrementalNB(self.schema, self.alpha)

    def learn_one(self, x: Instance):
        c = x.label
        w = x.weight
        if w <= 0:
            return
        self.class_counts[c] += w
        row = self.estimators[c]
        for j, v in enumerate(x.values):
            if v != v:
                continue
            if self.categorical[j]:
                self.cat_counts[j][c, int(v)] += w
            else:
                row[j].update(v, w)

    def _moments(self):
        means = np.array([[e.mean for e in row] for row in self.estimators])
        variances = np.array([[e.variance for e in row] for row in self.estimators])
        return means, variances

    def predict_proba_one(self, x: Instance) -> np.ndarray:
        means, variances = self._moments()
        values = x.values if isinstance(x, Instance) else x
        lj = nb_log_joint(np.asarray(values, dtype=float), self.class_counts, means, variances,
                          self.cat_counts, self.categorical, self.alpha, self.n_categories)
        return normalize_log_posterior(lj)[0]
