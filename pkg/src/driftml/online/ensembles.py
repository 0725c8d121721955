"""Drift-adaptive online ensembles.

Poisson resampling is applied as an instance weight: training a member once
with weight ``K`` is equivalent, at the sufficient-statistics level, to
training it on ``K`` copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..drift import ADWIN, DDM, EDDM, DriftDetector, Status
from ..stream import Instance, Schema
from .base import OnlineClassifier, weighted_vote
from .hoeffding import HoeffdingTree, HTParams

# Tree defaults for ensemble members (faster growth than a standalone tree).
ENSEMBLE_TREE_PARAMS = HTParams(grace_period=50, split_confidence=0.01, tie_threshold=0.05)


def member_rngs(seed, n: int) -> list[np.random.Generator]:
    """Independent per-member generators, stable under member count prefixes."""
    return [np.random.default_rng(ss) for ss in np.random.SeedSequence(seed).spawn(n)]


def _make_pair(name, drift_delta, warning_delta):
    """(drift detector, warning detector) for a detector family name."""
    if name is None or str(name).lower() == "none":
        return None, None
    key = str(name).upper()
    if key == "ADWIN":
        return ADWIN(drift_delta), ADWIN(warning_delta)
    if key == "DDM":
        return DDM(), DDM()
    if key == "EDDM":
        return EDDM(), EDDM()
    raise ValueError(f"unknown drift detector {name!r}")


def _signals_change(det: DriftDetector, status: Status, want_warning: bool) -> bool:
    """Interpret a detector status as an error-rate *increase* signal."""
    if isinstance(det, ADWIN):
        return status is Status.DRIFT and det.last_change > 0
    if want_warning:
        return status in (Status.WARNING, Status.DRIFT)
    return status is Status.DRIFT


class OnlineBagging(OnlineClassifier):
    """Oza-style online bagging; ``lam=6`` gives leveraging bagging's resampling.

    Each member trains on an instance with weight ``K ~ Poisson(lam)``. With
    ``detector`` set, each member owns a detector fed its 0/1 loss; on drift
    the member and its detector are reset.
    """

    def __init__(self, base: OnlineClassifier, n_models: int = 10, lam: float = 1.0,
                 detector: str | None = None, detector_delta: float = 0.002, seed: int = 0):
        if lam <= 0:
            raise ValueError("lam must be positive")
        self.base = base
        self.schema = base.schema
        self.n_classes = base.n_classes
        self.n_models = n_models
        self.lam = lam
        self.detector = detector
        self.detector_delta = detector_delta
        self.seed = seed
        self.reset()

    def reset(self):
        self.members = [self.base.clone() for _ in range(self.n_models)]
        self.rngs = member_rngs(self.seed, self.n_models)
        self.detectors = [_make_pair(self.detector, self.detector_delta, 0.01)[0] for _ in range(self.n_models)]
        self.errors = [0] * self.n_models
        self.seen = [0] * self.n_models
        self.replication_log: list[list[int]] = []
        self.events: list[dict] = []
        self.t = 0

    def clone(self):
        return OnlineBagging(self.base.clone(), self.n_models, self.lam, self.detector,
                             self.detector_delta, self.seed)

    def learn_one(self, x: Instance):
        ks = []
        for i, m in enumerate(self.members):
            pred = m.predict_one(x)
            err = int(pred != x.label)
            self.errors[i] += err
            self.seen[i] += 1
            det = self.detectors[i]
            if det is not None:
                st = det.update(err)
                if _signals_change(det, st, False):
                    self.members[i] = self.base.clone()
                    det.reset()
                    self.events.append({"t": self.t, "member": i, "kind": "drift"})
            k = int(self.rngs[i].poisson(self.lam))
            ks.append(k)
            if k > 0:
                self.members[i].learn_one(Instance(x.values, x.label, x.weight * k))
        self.replication_log.append(ks)
        self.t += 1

    def predict_proba_one(self, x) -> np.ndarray:
        return weighted_vote([m.predict_proba_one(x) for m in self.members], np.ones(self.n_models))


@dataclass
class _Member:
    learner: OnlineClassifier
    drift: DriftDetector | None
    warning: DriftDetector | None
    rng: np.random.Generator
    background: OnlineClassifier | None = None
    correct: float = 0.0
    seen: float = 0.0

    @property
    def weight(self) -> float:
        return self.correct / self.seen if self.seen else 0.0


class _AdaptiveEnsemble(OnlineClassifier):
    """Shared ARF/SRP machinery: Poisson resampling, warning-spawned
    background learners, drift-triggered replacement and accuracy-weighted
    soft voting."""

    def __init__(self, schema: Schema, n_models=10, lam=6.0, drift_detector="ADWIN",
                 drift_delta=0.001, warning_delta=0.01, tree_params: HTParams | None = None,
                 seed=0):
        if not 1 <= n_models <= 100:
            raise ValueError("n_models must lie in [1, 100]")
        if lam <= 0:
            raise ValueError("lam must be positive")
        self.schema = schema
        self.n_classes = schema.n_classes
        self.n_features = schema.n_features
        self.n_models = n_models
        self.lam = lam
        self.drift_detector = drift_detector
        self.drift_delta = drift_delta
        self.warning_delta = warning_delta
        self.tree_params = tree_params or ENSEMBLE_TREE_PARAMS
        self.seed = seed
        self.reset()

    # hooks ---------------------------------------------------------------
    def _new_learner(self, i: int, rng) -> OnlineClassifier:  # pragma: no cover - abstract
        raise NotImplementedError

    def _view(self, i: int, x: Instance) -> Instance:
        return x

    # ---------------------------------------------------------------------
    def reset(self):
        rngs = member_rngs(self.seed, self.n_models)
        self._setup(rngs)
        self.members = []
        for i, rng in enumerate(rngs):
            d, w = _make_pair(self.drift_detector, self.drift_delta, self.warning_delta)
            self.members.append(_Member(self._new_learner(i, rng), d, w, rng))
        self.events: list[dict] = []
        self.n_replacements = 0
        self.t = 0

    def _setup(self, rngs):
        pass

    def learn_one(self, x: Instance):
        y = x.label
        for i, m in enumerate(self.members):
            xi = self._view(i, x)
            pred = m.learner.predict_one(xi)
            err = int(pred != y)
            m.seen += x.weight
            m.correct += x.weight * (1 - err)
            if m.warning is not None:
                st = m.warning.update(err)
                if _signals_change(m.warning, st, True):
                    m.background = self._new_learner(i, m.rng)
                    m.warning.reset()
                    self.events.append({"t": self.t, "member": i, "kind": "warning"})
            if m.drift is not None:
                st = m.drift.update(err)
                if _signals_change(m.drift, st, False):
                    m.learner = m.background if m.background is not None else self._new_learner(i, m.rng)
                    m.background = None
                    m.drift.reset()
                    if m.warning is not None:
                        m.warning.reset()
                    m.correct = m.seen = 0.0
                    self.n_replacements += 1
                    self.events.append({"t": self.t, "member": i, "kind": "drift"})
            k = int(m.rng.poisson(self.lam))
            if k > 0:
                inst = Instance(xi.values, y, xi.weight * k)
                m.learner.learn_one(inst)
                if m.background is not None:
                    m.background.learn_one(inst)
        self.t += 1

    def member_probas(self, x) -> np.ndarray:
        if not isinstance(x, Instance):
            x = Instance(tuple(x))
        return np.array([m.learner.predict_proba_one(self._view(i, x)) for i, m in enumerate(self.members)])

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.members])

    def predict_proba_one(self, x) -> np.ndarray:
        return weighted_vote(self.member_probas(x), self.weights)


class AdaptiveRandomForest(_AdaptiveEnsemble):
    """Hoeffding trees with per-leaf random feature subsets of size ``m``
    (default ``ceil(sqrt(F))``) and per-tree drift/warning detectors."""

    def __init__(self, schema: Schema, n_models=10, max_features=None, lam=6.0,
                 drift_detector="ADWIN", drift_delta=0.001, warning_delta=0.01,
                 tree_params=None, seed=0):
        F = schema.n_features
        self.max_features = max_features if max_features is not None else max(1, math.ceil(math.sqrt(F)))
        super().__init__(schema, n_models, lam, drift_detector, drift_delta, warning_delta,
                         tree_params, seed)

    def clone(self):
        return AdaptiveRandomForest(self.schema, self.n_models, self.max_features, self.lam,
                                    self.drift_detector, self.drift_delta, self.warning_delta,
                                    self.tree_params, self.seed)

    def _new_learner(self, i, rng):
        m = None if self.max_features >= self.n_features else self.max_features
        return HoeffdingTree(self.schema, self.tree_params, max_features=m, seed=rng)


class SubspaceEnsemble(_AdaptiveEnsemble):
    """Streaming-random-patches style ensemble.

    Member ``i`` is bound at construction to a global random feature subset of
    size ``ceil(fraction * F)`` and only ever sees that projection.
    """

    def __init__(self, schema: Schema, n_models=10, fraction=0.6, lam=6.0,
                 drift_detector="ADWIN", drift_delta=0.001, warning_delta=0.01,
                 tree_params=None, seed=0):
        if not 0 < fraction <= 1:
            raise ValueError("subspace fraction must lie in (0, 1]")
        self.fraction = fraction
        super().__init__(schema, n_models, lam, drift_detector, drift_delta, warning_delta,
                         tree_params, seed)

    def clone(self):
        return SubspaceEnsemble(self.schema, self.n_models, self.fraction, self.lam,
                                self.drift_detector, self.drift_delta, self.warning_delta,
                                self.tree_params, self.seed)

    def _setup(self, rngs):
        F = self.n_features
        size = math.ceil(round(self.fraction * F, 9))
        self.subspaces = []
        self._schemas = []
        for rng in rngs:
            feats = sorted(rng.choice(F, size, replace=False).tolist()) if size < F else list(range(F))
            self.subspaces.append(feats)
            cols = [self.schema.feature_columns[j] for j in feats]
            self._schemas.append(self.schema.with_features(cols))

    def _new_learner(self, i, rng):
        return HoeffdingTree(self._schemas[i], self.tree_params, seed=rng)

    def _view(self, i, x: Instance) -> Instance:
        v = x.values
        return Instance(tuple(v[j] for j in self.subspaces[i]), x.label, x.weight)


class WeightedProbabilityCombiner(OnlineClassifier):
    """Soft vote of base learners weighted by inverse running prequential error.

    ``w_b = 1 / (err_b + eps)``; each base is scored on an instance before it
    learns it, so weights always reflect test-then-train error.
    """

    def __init__(self, bases: list[OnlineClassifier], eps: float = 0.01):
        if not bases:
            raise ValueError("need at least one base learner")
        self.bases = list(bases)
        self.schema = bases[0].schema
        self.n_classes = bases[0].n_classes
        self.eps = eps
        self.errors = [0.0] * len(self.bases)
        self.seen = [0.0] * len(self.bases)
        self.events: list[dict] = []
        self.t = 0

    def reset(self):
        for b in self.bases:
            b.reset()
        self.errors = [0.0] * len(self.bases)
        self.seen = [0.0] * len(self.bases)
        self.events = []
        self.t = 0

    def clone(self):
        return WeightedProbabilityCombiner([b.clone() for b in self.bases], self.eps)

    @property
    def error_rates(self) -> np.ndarray:
        return np.array([e / s if s else 0.0 for e, s in zip(self.errors, self.seen)])

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / (self.error_rates + self.eps)

    def learn_one(self, x: Instance):
        for i, b in enumerate(self.bases):
            self.errors[i] += int(b.predict_one(x) != x.label)
            self.seen[i] += 1
            n_before = len(getattr(b, "events", ()))
            b.learn_one(x)
            for ev in getattr(b, "events", ())[n_before:]:
                self.events.append(dict(ev, base=i, t=self.t))
        self.t += 1

    def predict_proba_one(self, x) -> np.ndarray:
        return weighted_vote([b.predict_proba_one(x) for b in self.bases], self.weights)


def pwpae(schema: Schema, n_models: int = 5, seed: int = 0) -> WeightedProbabilityCombiner:
    """Four-base combiner: ARF and subspace ensembles, each with ADWIN and DDM."""
    bases = [
        AdaptiveRandomForest(schema, n_models, drift_detector="ADWIN", seed=seed),
        AdaptiveRandomForest(schema, n_models, drift_detector="DDM", seed=seed + 1),
        SubspaceEnsemble(schema, n_models, drift_detector="ADWIN", seed=seed + 2),
        SubspaceEnsemble(schema, n_models, drift_detector="DDM", seed=seed + 3),
    ]
    return WeightedProbabilityCombiner(bases)
