"""Shared online-learning contract and small helpers."""

from __future__ import annotations

import math

import numpy as np

from ..stream import Instance, Schema


class OnlineClassifier:
    """Incremental classifier over a fixed schema.

    ``predict_proba_one`` is legal before any ``learn_one`` call and then
    returns the uniform distribution.
    """

    schema: Schema
    n_classes: int

    def learn_one(self, x: Instance) -> None:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_proba_one(self, x: Instance) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def reset(self) -> None:  # pragma: no cover - abstract
        raise NotImplementedError

    def predict_one(self, x: Instance) -> int:
        return int(np.argmax(self.predict_proba_one(x)))

    def clone(self) -> "OnlineClassifier":
        """Fresh, untrained copy with the same configuration."""
        raise NotImplementedError


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    s = v.sum()
    if s <= 0 or not math.isfinite(s):
        return np.full(v.shape, 1.0 / v.size)
    return v / s


def weighted_vote(probas, weights) -> np.ndarray:
    """Weighted mean of probability vectors; equal weights when all are zero."""
    probas = np.asarray(probas, dtype=float)
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        w = np.ones(len(probas))
    out = (w[:, None] * probas).sum(axis=0) / w.sum()
    return out / out.sum()


class FrozenClassifier(OnlineClassifier):
    """Wraps a fitted batch classifier; ``learn_one`` is a no-op."""

    def __init__(self, model, schema: Schema):
        self.model = model
        self.schema = schema
        self.n_classes = schema.n_classes

    def learn_one(self, x):
        pass

    def predict_proba_one(self, x):
        return self.model.predict_proba(x)

    def reset(self):
        pass


class ConstantClassifier(OnlineClassifier):
    """Always predicts the same class (useful as a floor baseline)."""

    def __init__(self, schema: Schema, label: int = 0):
        self.schema = schema
        self.n_classes = schema.n_classes
        self.label = label

    def learn_one(self, x):
        pass

    def predict_proba_one(self, x):
        p = np.zeros(self.n_classes)
        p[self.label] = 1.0
        return p

    def reset(self):
        pass

    def clone(self):
        return ConstantClassifier(self.schema, self.label)
