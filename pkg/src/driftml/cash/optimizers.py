"""Grid search, random search and a tree-structured Parzen estimator.

An objective maps a config dict to a loss, or to ``(loss, metrics)``.
Exceptions raised by the objective mark the trial ``Failed`` with an
infinite loss; they never abort the search.
"""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np
from scipy.special import logsumexp, ndtr, ndtri

from ..errors import SearchSpaceError
from .space import (Categorical, Continuous, Integer, SearchSpace, Trial,
                    TrialHistory, base_param)

GAMMA = 0.25
N_STARTUP = 10
N_CANDIDATES = 24
BANDWIDTH_FLOOR = 0.01

Objective = Callable[[dict], object]


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def evaluate(objective: Objective, config: dict, algorithm: str = "") -> Trial:
    """Run ``objective`` on one config and wrap the outcome as a Trial."""
    t0 = time.perf_counter()
    try:
        out = objective(dict(config))
    except Exception as exc:  # noqa: BLE001 - recorded on the trial
        return Trial(algorithm, dict(config), math.inf, time.perf_counter() - t0,
                     "Failed", {"error": f"{type(exc).__name__}: {exc}"})
    elapsed = time.perf_counter() - t0
    if isinstance(out, tuple):
        loss, metrics = out
    else:
        loss, metrics = out, {}
    loss = float(loss)
    if math.isnan(loss):
        return Trial(algorithm, dict(config), math.inf, elapsed, "Failed", {"error": "nan loss"})
    return Trial(algorithm, dict(config), loss, elapsed, "Ok", dict(metrics))


def _start(history: TrialHistory | None) -> TrialHistory:
    return TrialHistory() if history is None else history


def grid_search(space: SearchSpace, objective: Objective, max_evals: int | None = None,
                resolution=None, algorithm: str = "",
                history: TrialHistory | None = None) -> tuple[Trial, TrialHistory]:
    """Evaluate the Cartesian product in lexicographic order.

    Parameters
    ----------
    max_evals : int, optional
        Truncates the product; ``None`` evaluates all of it.
    resolution : int or dict, optional
        Points per continuous dimension; also thins integer ranges.
    history : TrialHistory, optional
        Pre-evaluated trials (for example an injected default) to extend.

    Returns
    -------
    (Trial, TrialHistory)
        The minimum-loss trial of the returned history.
    """
    if len(space) == 0:
        raise SearchSpaceError("empty search space")
    history = _start(history)
    for i, config in enumerate(space.grid(resolution)):
        if max_evals is not None and i >= max_evals:
            break
        history.add(evaluate(objective, config, algorithm))
    return history.best(), history


def random_search(space: SearchSpace, objective: Objective, max_evals: int, seed=0,
                  algorithm: str = "",
                  history: TrialHistory | None = None) -> tuple[Trial, TrialHistory]:
    """I.i.d. prior draws; log-uniform on log-scaled dimensions."""
    if len(space) == 0:
        raise SearchSpaceError("empty search space")
    history = _start(history)
    if max_evals < 0:
        raise SearchSpaceError("max_evals must be >= 0")
    if max_evals == 0 and not history.trials:
        raise SearchSpaceError("max_evals must be >= 1")
    rng = as_rng(seed)
    for _ in range(max_evals):
        history.add(evaluate(objective, space.sample(rng), algorithm))
    return history.best(), history


# -- Parzen estimators ----------------------------------------------------------

class _Numeric:
    """Truncated Gaussian mixture on [a, b] with a wide prior component.

    Integers live on [lo - 0.5, hi + 0.5] and are scored by bin mass.
    """

    def __init__(self, p, points):
        self.is_int = isinstance(p, Integer)
        self.log = isinstance(p, Continuous) and p.log
        if self.is_int:
            self.a, self.b = p.lo - 0.5, p.hi + 0.5
            self.lo, self.hi = p.lo, p.hi
        elif self.log:
            self.a, self.b = math.log(p.lo), math.log(p.hi)
            self.lo, self.hi = p.lo, p.hi
        else:
            self.a, self.b = float(p.lo), float(p.hi)
        span = self.b - self.a
        u = np.asarray([self._to_u(v) for v in points], dtype=float)
        if len(u) == 0:
            bw = np.zeros(0)
        elif len(u) == 1:
            bw = np.array([span])
        else:
            order = np.argsort(u, kind="stable")
            s = u[order]
            gaps = np.diff(s)
            nn = np.empty(len(s))
            nn[0] = gaps[0]
            nn[-1] = gaps[-1]
            if len(s) > 2:
                nn[1:-1] = np.minimum(gaps[:-1], gaps[1:])
            bw = np.empty(len(s))
            bw[order] = nn
        bw = np.maximum(bw, BANDWIDTH_FLOOR * span)
        # prior component: centred, one range wide
        self.mu = np.append(u, 0.5 * (self.a + self.b))
        self.sigma = np.append(bw, span)
        self.weights = np.full(len(self.mu), 1.0 / len(self.mu))
        self.cdf_a = ndtr((self.a - self.mu) / self.sigma)
        self.cdf_b = ndtr((self.b - self.mu) / self.sigma)
        self.mass = np.maximum(self.cdf_b - self.cdf_a, 1e-300)

    def _to_u(self, v) -> float:
        return math.log(v) if self.log else float(v)

    def sample_many(self, rng, n: int) -> list:
        k = rng.choice(len(self.mu), size=n, p=self.weights)
        q = rng.uniform(self.cdf_a[k], self.cdf_b[k])
        q = np.clip(q, 1e-300, 1 - 1e-16)
        u = np.clip(self.mu[k] + self.sigma[k] * ndtri(q), self.a, self.b)
        if self.is_int:
            return [int(v) for v in np.clip(np.round(u), self.lo, self.hi)]
        if self.log:
            return [float(v) for v in np.clip(np.exp(u), self.lo, self.hi)]
        return [float(v) for v in u]

    def log_pdf(self, v) -> float:
        if self.is_int:
            lo = ndtr((v - 0.5 - self.mu) / self.sigma)
            hi = ndtr((v + 0.5 - self.mu) / self.sigma)
            comp = np.maximum(hi - lo, 1e-300) / self.mass
            return float(logsumexp(np.log(comp), b=self.weights))
        u = self._to_u(v)
        z = (u - self.mu) / self.sigma
        logc = -0.5 * z * z - np.log(self.sigma * math.sqrt(2 * math.pi)) - np.log(self.mass)
        return float(logsumexp(logc, b=self.weights))


class _Choice:
    """Smoothed frequencies: one pseudo-count per choice."""

    def __init__(self, p: Categorical, points):
        self.choices = p.choices
        counts = np.ones(len(self.choices))
        for v in points:
            counts[self.choices.index(v)] += 1
        self.probs = counts / counts.sum()

    def sample_many(self, rng, n: int) -> list:
        return [self.choices[i] for i in rng.choice(len(self.choices), size=n, p=self.probs)]

    def log_pdf(self, v) -> float:
        return float(math.log(self.probs[self.choices.index(v)]))


def _estimator(p, points):
    b = base_param(p)
    if isinstance(b, Categorical):
        return _Choice(b, points)
    return _Numeric(b, points)


def split_losses(losses, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks (good, bad) with good = loss < gamma-quantile."""
    losses = np.asarray(losses, dtype=float)
    y_star = np.quantile(losses, gamma)
    good = losses < y_star
    return good, ~good


def tpe_densities(history: TrialHistory, space: SearchSpace, gamma: float = GAMMA):
    """Per-parameter (l, g) estimators, or ``None`` when the split is degenerate."""
    done = history.completed
    good, bad = split_losses([t.loss for t in done], gamma)
    if not good.any() or not bad.any():
        return None
    out = {}
    for p in space:
        g_pts = [t.config[p.name] for t, m in zip(done, good) if m and p.name in t.config]
        b_pts = [t.config[p.name] for t, m in zip(done, bad) if m and p.name in t.config]
        out[p.name] = (_estimator(p, g_pts), _estimator(p, b_pts))
    return out


def _prior_densities(space: SearchSpace):
    out = {}
    for p in space:
        est = _estimator(p, [])
        out[p.name] = (est, est)
    return out


def tpe_log_ratio(config: dict, dens) -> float:
    """Sum over active parameters of log l(x) - log g(x)."""
    return sum(dens[k][0].log_pdf(v) - dens[k][1].log_pdf(v) for k, v in config.items())


def tpe_suggest(history: TrialHistory, space: SearchSpace, gamma: float = GAMMA,
                n_candidates: int = N_CANDIDATES, seed=0, n_startup: int = N_STARTUP,
                return_scores: bool = False):
    """Propose the next config by maximising l(x) / g(x) over candidates drawn from l.

    Falls back to a prior draw while fewer than ``n_startup`` trials have
    completed. When every loss ties, l and g both equal the prior and the
    first candidate is returned.
    """
    if len(space) == 0:
        raise SearchSpaceError("empty search space")
    rng = as_rng(seed)
    if len(history.completed) < n_startup:
        config = space.sample(rng)
        return (config, []) if return_scores else config
    dens = tpe_densities(history, space, gamma)
    if dens is None:
        dens = _prior_densities(space)
    draws = {p.name: dens[p.name][0].sample_many(rng, n_candidates) for p in space}
    candidates, scores = [], []
    for i in range(n_candidates):
        config: dict = {}
        for p in space:
            if space.is_active(p, config):
                config[p.name] = draws[p.name][i]
        candidates.append(config)
        scores.append(tpe_log_ratio(config, dens))
    best = int(np.argmax(scores))
    return (candidates[best], scores) if return_scores else candidates[best]


def tpe_search(space: SearchSpace, objective: Objective, max_evals: int, seed=0,
               gamma: float = GAMMA, n_candidates: int = N_CANDIDATES,
               n_startup: int = N_STARTUP, algorithm: str = "",
               history: TrialHistory | None = None) -> tuple[Trial, TrialHistory]:
    """Sequential TPE: suggest one config, evaluate it, commit, repeat."""
    if len(space) == 0:
        raise SearchSpaceError("empty search space")
    history = _start(history)
    history.gamma = gamma
    rng = as_rng(seed)
    for _ in range(max_evals):
        config = tpe_suggest(history, space, gamma, n_candidates, rng, n_startup)
        history.add(evaluate(objective, config, algorithm))
    return history.best(), history


OPTIMIZERS = {"grid": grid_search, "random": random_search, "tpe": tpe_search}


def run_optimizer(name: str, space: SearchSpace, objective: Objective, max_evals: int,
                  seed=0, algorithm: str = "", history: TrialHistory | None = None,
                  resolution=None) -> tuple[Trial, TrialHistory]:
    name = name.lower()
    if name == "grid":
        return grid_search(space, objective, max_evals, resolution, algorithm, history)
    if name == "random":
        return random_search(space, objective, max_evals, seed, algorithm, history)
    if name in ("tpe", "bo-tpe"):
        return tpe_search(space, objective, max_evals, seed, algorithm=algorithm, history=history)
    raise SearchSpaceError(f"unknown optimizer {name!r}")
