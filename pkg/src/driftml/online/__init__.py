"""Incremental learners and drift-adaptive ensembles."""

from .base import ConstantClassifier, FrozenClassifier, OnlineClassifier, weighted_vote
from .bayes import GaussianEstimator, IncrementalNB
from .ensembles import (
    AdaptiveRandomForest,
    OnlineBagging,
    SubspaceEnsemble,
    WeightedProbabilityCombiner,
    member_rngs,
    pwpae,
)
from .hoeffding import EFDT, HoeffdingTree, HTParams, hoeffding_bound

__all__ = [
    "AdaptiveRandomForest",
    "ConstantClassifier",
    "EFDT",
    "FrozenClassifier",
    "GaussianEstimator",
    "HTParams",
    "HoeffdingTree",
    "IncrementalNB",
    "OnlineBagging",
    "OnlineClassifier",
    "SubspaceEnsemble",
    "WeightedProbabilityCombiner",
    "hoeffding_bound",
    "member_rngs",
    "pwpae",
    "weighted_vote",
]
