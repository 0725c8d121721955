"""Algorithm ids, model factories and default search spaces.

Offline factories take ``(config, seed)`` and return an unfitted
:class:`~driftml.offline.Classifier`; online factories take
``(schema, config, seed)`` and return an
:class:`~driftml.online.OnlineClassifier`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..errors import ConfigError
from ..offline import KNN, DecisionTree, DTParams, NaiveBayes, RandomForest, RFParams
from ..online import (EFDT, AdaptiveRandomForest, HoeffdingTree, HTParams, IncrementalNB,
                      OnlineBagging, SubspaceEnsemble, pwpae)
from .space import Categorical, Continuous, Integer, SearchSpace


@dataclass(frozen=True)
class Algorithm:
    id: str
    mode: str  # "Offline" or "Online"
    factory: Callable
    space: SearchSpace
    default: dict

    def build(self, config: dict | None = None, seed: int = 0, schema=None):
        cfg = dict(self.default)
        cfg.update(config or {})
        if self.mode == "Offline":
            return self.factory(cfg, seed)
        return self.factory(schema, cfg, seed)


# -- offline -----------------------------------------------------------------

def _tree_params(cfg: dict, **extra) -> DTParams:
    return DTParams(criterion=cfg.get("criterion", "gini"), max_depth=cfg.get("max_depth"),
                    min_samples_split=int(cfg.get("min_samples_split", 2)),
                    min_samples_leaf=int(cfg.get("min_samples_leaf", 1)), **extra)


def _nb(cfg, seed):
    return NaiveBayes(alpha=float(cfg["alpha"]))


def _knn(cfg, seed):
    return KNN(n_neighbors=int(cfg["n_neighbors"]))


def _cart(cfg, seed):
    return DecisionTree(_tree_params(cfg), seed=seed)


def _rf(cfg, seed):
    tree = _tree_params(cfg, max_features="sqrt")
    return RandomForest(RFParams(n_estimators=int(cfg["n_estimators"]), tree=tree, seed=seed))


_TREE_SPACE = [
    Integer("max_depth", 5, 50),
    Integer("min_samples_split", 2, 11),
    Integer("min_samples_leaf", 1, 11),
    Categorical("criterion", ("gini", "entropy")),
]
# max_depth 50 stands in for "unlimited" so the default lies inside the space
_TREE_DEFAULT = {"max_depth": 50, "min_samples_split": 2, "min_samples_leaf": 1, "criterion": "gini"}

# -- online ------------------------------------------------------------------


def _ht_params(cfg: dict) -> HTParams:
    return HTParams(grace_period=int(cfg["grace_period"]),
                    split_confidence=float(cfg["split_confidence"]),
                    tie_threshold=float(cfg["tie_threshold"]),
                    leaf_prediction=cfg.get("leaf_prediction", "NaiveBayes"))


def _ht(schema, cfg, seed):
    return HoeffdingTree(schema, _ht_params(cfg), seed=seed)


def _efdt(schema, cfg, seed):
    return EFDT(schema, _ht_params(cfg), seed=seed)


def _inb(schema, cfg, seed):
    return IncrementalNB(schema, alpha=float(cfg["alpha"]))


def _arf(schema, cfg, seed):
    return AdaptiveRandomForest(schema, n_models=int(cfg["n_models"]),
                                drift_detector=cfg["drift_detector"], seed=seed)


def _srp(schema, cfg, seed):
    return SubspaceEnsemble(schema, n_models=int(cfg["n_models"]),
                            drift_detector=cfg["drift_detector"], seed=seed)


def _lb(schema, cfg, seed):
    base = HoeffdingTree(schema, HTParams(grace_period=50, split_confidence=0.01))
    return OnlineBagging(base, n_models=int(cfg["n_models"]), lam=float(cfg["lam"]),
                         detector="ADWIN", seed=seed)


def _pwpae(schema, cfg, seed):
    return pwpae(schema, n_models=int(cfg["n_models"]), seed=seed)


_HT_SPACE = [
    Integer("grace_period", 50, 500),
    Continuous("split_confidence", 1e-9, 1e-2, log=True),
    Continuous("tie_threshold", 0.01, 0.2),
]
_HT_DEFAULT = {"grace_period": 200, "split_confidence": 1e-7, "tie_threshold": 0.05}
_ENSEMBLE_SPACE = [Integer("n_models", 3, 20), Categorical("drift_detector", ("ADWIN", "DDM"))]

REGISTRY: dict[str, Algorithm] = {}


def register(alg: Algorithm) -> None:
    REGISTRY[alg.id] = alg


for _alg in [
    Algorithm("NB", "Offline", _nb, SearchSpace([Continuous("alpha", 1e-3, 10.0, log=True)]),
              {"alpha": 1.0}),
    Algorithm("KNN", "Offline", _knn, SearchSpace([Integer("n_neighbors", 1, 20)]),
              {"n_neighbors": 5}),
    Algorithm("CART", "Offline", _cart, SearchSpace(_TREE_SPACE), dict(_TREE_DEFAULT)),
    Algorithm("RF", "Offline", _rf, SearchSpace([Integer("n_estimators", 50, 500)] + _TREE_SPACE),
              {"n_estimators": 100, **_TREE_DEFAULT}),
    Algorithm("HT", "Online", _ht, SearchSpace(_HT_SPACE), dict(_HT_DEFAULT)),
    Algorithm("EFDT", "Online", _efdt, SearchSpace(_HT_SPACE), dict(_HT_DEFAULT)),
    Algorithm("OnlineNB", "Online", _inb, SearchSpace([Continuous("alpha", 1e-3, 10.0, log=True)]),
              {"alpha": 1.0}),
    Algorithm("ARF", "Online", _arf, SearchSpace(_ENSEMBLE_SPACE),
              {"n_models": 10, "drift_detector": "ADWIN"}),
    Algorithm("SRP", "Online", _srp, SearchSpace(_ENSEMBLE_SPACE),
              {"n_models": 10, "drift_detector": "ADWIN"}),
    Algorithm("LB", "Online", _lb, SearchSpace([Integer("n_models", 3, 20), Continuous("lam", 1.0, 10.0)]),
              {"n_models": 10, "lam": 6.0}),
    Algorithm("PWPAE", "Online", _pwpae, SearchSpace([Integer("n_models", 3, 20)]),
              {"n_models": 5}),
]:
    register(_alg)

ALIASES = {"DT": "CART", "DecisionTree": "CART", "RandomForest": "RF", "NaiveBayes": "NB",
           "IncrementalNB": "OnlineNB", "VFDT": "HT", "LeveragingBagging": "LB"}


def get_algorithm(name: str, mode: str | None = None) -> Algorithm:
    key = ALIASES.get(name, name)
    if key not in REGISTRY:
        raise ConfigError(f"unknown algorithm id {name!r}; known: {sorted(REGISTRY)}")
    alg = REGISTRY[key]
    if mode is not None and alg.mode != mode:
        raise ConfigError(f"algorithm {name!r} is {alg.mode}, not usable in {mode} mode")
    return alg


# Spaces and reported optima of the tuned models in the intrusion-detection
# case study. LightGBM is not implemented; its space only parses.
REFERENCE_SPACES: dict[str, SearchSpace] = {
    "LightGBM": SearchSpace([
        Integer("n_estimators", 50, 500),
        Integer("max_depth", 5, 50),
        Continuous("learning_rate", 0.0, 1.0),
        Integer("num_leaves", 100, 2000),
        Integer("min_child_samples", 10, 50),
    ]),
    "RF": SearchSpace([
        Integer("n_estimators", 50, 500),
        Integer("max_depth", 5, 50),
        Integer("min_samples_split", 2, 11),
        Integer("min_samples_leaf", 1, 11),
        Categorical("criterion", ("gini", "entropy")),
    ]),
    "ARF": SearchSpace(_ENSEMBLE_SPACE),
    "SRP": SearchSpace(_ENSEMBLE_SPACE),
}

REFERENCE_OPTIMA: dict[str, dict[str, dict]] = {
    "CICIDS2017": {
        "LightGBM": {"n_estimators": 360, "max_depth": 36, "learning_rate": 0.957,
                     "num_leaves": 1100, "min_child_samples": 50},
        "RF": {"n_estimators": 460, "max_depth": 26, "min_samples_split": 8,
               "min_samples_leaf": 1, "criterion": "entropy"},
        "ARF": {"n_models": 18, "drift_detector": "DDM"},
        "SRP": {"n_models": 14, "drift_detector": "DDM"},
    },
    "IoTID20": {
        "LightGBM": {"n_estimators": 440, "max_depth": 38, "learning_rate": 0.456,
                     "num_leaves": 1200, "min_child_samples": 25},
        "RF": {"n_estimators": 220, "max_depth": 14, "min_samples_split": 2,
               "min_samples_leaf": 4, "criterion": "entropy"},
        "ARF": {"n_models": 15, "drift_detector": "DDM"},
        "SRP": {"n_models": 10, "drift_detector": "DDM"},
    },
}
