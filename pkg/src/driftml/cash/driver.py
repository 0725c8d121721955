"""Two-stage CASH: default-config model selection, then HPO of the leaders."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import AllTrialsFailedError, DriftMLError
from ..evaluation import default_scoring, kfold_cv, prequential_eval
from ..stream import Dataset, Instance
from .optimizers import evaluate, run_optimizer
from .registry import get_algorithm
from .space import SearchSpace, Trial, TrialHistory

TIMING_KEYS = ("learn_seconds",)


@dataclass
class Candidate:
    """An algorithm id with its search space, default config and model factory.

    ``factory(config)`` must return an unfitted model exposing ``fit`` and
    ``predict_many``.
    """

    algorithm: str
    space: SearchSpace
    factory: Callable[[dict], object]
    default: dict

    @classmethod
    def from_registry(cls, algorithm: str, seed: int = 0, space: SearchSpace | None = None,
                      default: dict | None = None, wrap: Callable | None = None) -> "Candidate":
        alg = get_algorithm(algorithm, "Offline")
        space = space or alg.space
        if default is None:
            default = {k: v for k, v in alg.default.items() if k in space.names}

        def factory(config, _alg=alg):
            model = _alg.build(config, seed)
            return wrap(model) if wrap else model

        return cls(alg.id, space, factory, default)


def cv_objective(candidate: Candidate, d: Dataset, cv_k: int, metric: str, seed: int,
                 scoring: Callable = default_scoring, stratified: bool = True):
    """Loss ``1 - mean CV metric``; every config sees the same folds."""

    def objective(config: dict):
        cv = kfold_cv(lambda: candidate.factory(config), d, cv_k, seed, stratified, scoring)
        summary = cv.summary()
        if metric not in summary:
            raise DriftMLError(f"scoring does not report metric {metric!r}")
        metrics = {k: v["mean"] for k, v in summary.items()}
        metrics.update({f"{k}_std": v["std"] for k, v in summary.items()})
        metrics["learn_seconds"] = float(np.sum(cv.fit_seconds))
        return 1.0 - metrics[metric], metrics

    return objective


def _strip_timing(metrics: dict) -> dict:
    return {k: v for k, v in metrics.items() if k not in TIMING_KEYS}


def trial_record(t: Trial, include_timing: bool = False) -> dict:
    d = t.to_dict(include_timing)
    if not include_timing:
        d["metrics"] = _strip_timing(d["metrics"])
    return d


@dataclass
class CashResult:
    best: Trial
    stage1: list[Trial]
    stage2: dict[str, TrialHistory]
    selected: list[str]
    metric: str = "f1"

    @property
    def algorithm(self) -> str:
        return self.best.algorithm

    @property
    def config(self) -> dict:
        return self.best.config

    def stage1_rows(self, include_timing: bool = False) -> list[dict]:
        rows = []
        for t in self.stage1:
            row = {"algorithm": t.algorithm, "status": t.status}
            for k in ("accuracy", "precision", "recall", "f1"):
                row[k] = t.metrics.get(k)
            if include_timing:
                row["learn_seconds"] = t.metrics.get("learn_seconds")
            rows.append(row)
        return rows

    def to_dict(self, include_timing: bool = False) -> dict:
        return {
            "metric": self.metric,
            "stage1": self.stage1_rows(include_timing),
            "selected": list(self.selected),
            "stage2": {a: [trial_record(t, include_timing) for t in h.trials]
                       for a, h in self.stage2.items()},
            "best": trial_record(self.best, include_timing),
        }

    def timing(self) -> dict:
        return {
            "stage1": {t.algorithm: {"wall_time": t.wall_time,
                                     "learn_seconds": t.metrics.get("learn_seconds")}
                       for t in self.stage1},
            "stage2": {a: [t.wall_time for t in h.trials] for a, h in self.stage2.items()},
        }


def cash_optimize(candidates: Sequence[Candidate], d: Dataset, cv_k: int = 5, metric: str = "f1",
                  budget: int = 20, optimizer: str = "tpe", seed: int = 0, top_n: int = 2,
                  resolution=None, scoring: Callable = default_scoring,
                  stratified: bool = True) -> CashResult:
    """Select and tune a learner by k-fold cross-validation.

    Stage 1 scores every candidate at its default config. Stage 2 runs the
    optimizer for ``budget`` further trials on each of the ``top_n`` best
    candidates, with the stage-1 default committed as trial 0 of its
    history, so the tuned result is never worse than the default.

    Parameters
    ----------
    candidates : sequence of Candidate
        Earlier candidates win ties.
    budget : int
        New trials per selected candidate; a trial count, not wall time.
        ``None`` with the grid optimizer evaluates the full product.

    Returns
    -------
    CashResult
        The minimum-loss trial across stage-2 histories plus the audit trail.

    Raises
    ------
    AllTrialsFailedError
        When no trial produced a finite loss.
    """
    if not candidates:
        raise DriftMLError("cash_optimize needs at least one candidate")
    if len(d) == 0:
        raise DriftMLError("cash_optimize needs a labeled, non-empty dataset")
    objectives = {c.algorithm: cv_objective(c, d, cv_k, metric, seed, scoring, stratified)
                  for c in candidates}
    stage1: list[Trial] = []
    for c in candidates:
        c.space.validate(c.default)
        stage1.append(evaluate(objectives[c.algorithm], c.default, c.algorithm))
    ok = [i for i, t in enumerate(stage1) if t.ok]
    if not ok:
        errors = {t.algorithm: t.metrics.get("error") for t in stage1}
        raise AllTrialsFailedError(f"every stage-1 trial failed: {errors}")
    ranked = sorted(ok, key=lambda i: (stage1[i].loss, i))
    chosen = ranked[:max(1, top_n)]

    stage2: dict[str, TrialHistory] = {}
    for rank, i in enumerate(chosen):
        c = candidates[i]
        history = TrialHistory(trials=[stage1[i]])
        if budget is None or budget > 0:
            run_optimizer(optimizer, c.space, objectives[c.algorithm], budget,
                          seed=int(np.random.SeedSequence([seed, rank]).generate_state(1)[0]),
                          algorithm=c.algorithm, history=history, resolution=resolution)
        stage2[c.algorithm] = history

    best = None
    for h in stage2.values():
        b = h.best()
        if best is None or b.loss < best.loss:
            best = b
    if best is None or math.isinf(best.loss):
        raise AllTrialsFailedError("every trial failed")
    return CashResult(best, stage1, stage2, [candidates[i].algorithm for i in chosen], metric)


# -- online selection --------------------------------------------------------


@dataclass
class SelectionResult:
    best: str
    scores: dict[str, float]
    summaries: dict[str, dict] = field(default_factory=dict)
    models: dict[str, object] = field(default_factory=dict)


def adaptive_model_select(candidates, prefix: Iterable[Instance] | Dataset, metric: str = "f1",
                          min_length: int = 100) -> SelectionResult:
    """Prequentially score each online learner on the same prefix; best metric wins.

    ``candidates`` is a sequence of ``(id, learner)`` pairs or a mapping.
    Learners are trained in place and returned in ``models``; ties go to the
    earlier candidate.
    """
    items = list(candidates.items()) if isinstance(candidates, dict) else list(candidates)
    if not items:
        raise DriftMLError("adaptive_model_select needs at least one candidate")
    rows = list(prefix) if not isinstance(prefix, Dataset) else [prefix.row(i) for i in range(len(prefix))]
    if len(rows) < min_length:
        raise DriftMLError(f"prefix of {len(rows)} instances is shorter than {min_length}")
    scores, summaries, models = {}, {}, {}
    for name, learner in items:
        trace = prequential_eval(rows, learner)
        summary = trace.summary()
        if metric not in summary:
            raise DriftMLError(f"unknown selection metric {metric!r}")
        scores[name] = float(summary[metric])
        summaries[name] = summary
        models[name] = learner
    best = max(scores, key=lambda k: (scores[k], -list(scores).index(k)))
    return SelectionResult(best, scores, summaries, models)
