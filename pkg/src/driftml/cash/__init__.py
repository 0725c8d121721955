"""Search spaces, optimizers and the two-stage CASH driver."""

from .driver import (Candidate, CashResult, SelectionResult, adaptive_model_select,
                     cash_optimize, cv_objective)
from .optimizers import (evaluate, grid_search, random_search, run_optimizer, split_losses,
                         tpe_densities, tpe_log_ratio, tpe_search, tpe_suggest)
from .registry import REFERENCE_OPTIMA, REFERENCE_SPACES, REGISTRY, Algorithm, get_algorithm
from .space import (Categorical, Conditional, Continuous, Integer, SearchSpace, Trial,
                    TrialHistory)

__all__ = [
    "Algorithm", "Candidate", "CashResult", "Categorical", "Conditional", "Continuous",
    "Integer", "REFERENCE_OPTIMA", "REFERENCE_SPACES", "REGISTRY", "SearchSpace",
    "SelectionResult", "Trial", "TrialHistory", "adaptive_model_select", "cash_optimize",
    "cv_objective", "evaluate", "get_algorithm", "grid_search", "random_search",
    "run_optimizer", "split_losses", "tpe_densities", "tpe_log_ratio", "tpe_search",
    "tpe_suggest",
]
