"""Mixed, optionally conditional, hyperparameter search spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from ..errors import SearchSpaceError


@dataclass(frozen=True)
class Continuous:
    name: str
    lo: float
    hi: float
    log: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise SearchSpaceError(f"{self.name}: lo must be < hi")
        if self.log and self.lo <= 0:
            raise SearchSpaceError(f"{self.name}: log scale needs lo > 0")

    def sample(self, rng) -> float:
        if self.log:
            v = math.exp(rng.uniform(math.log(self.lo), math.log(self.hi)))
            return float(min(max(v, self.lo), self.hi))  # exp/log round-off
        return float(rng.uniform(self.lo, self.hi))

    def contains(self, v) -> bool:
        return isinstance(v, (int, float)) and self.lo <= v <= self.hi

    def grid(self, resolution: int | None) -> list:
        if resolution is None:
            raise SearchSpaceError(f"{self.name}: continuous dimension needs a grid resolution")
        if resolution == 1:
            return [self.lo]
        if self.log:
            v = np.exp(np.linspace(math.log(self.lo), math.log(self.hi), resolution))
            return [float(x) for x in np.clip(v, self.lo, self.hi)]
        return [float(v) for v in np.linspace(self.lo, self.hi, resolution)]


@dataclass(frozen=True)
class Integer:
    name: str
    lo: int
    hi: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise SearchSpaceError(f"{self.name}: lo must be < hi")

    def sample(self, rng) -> int:
        return int(rng.integers(self.lo, self.hi + 1))

    def contains(self, v) -> bool:
        return isinstance(v, (int, np.integer)) and not isinstance(v, bool) and self.lo <= v <= self.hi

    def grid(self, resolution: int | None) -> list:
        values = list(range(self.lo, self.hi + 1))
        if resolution is None or resolution >= len(values):
            return values
        idx = np.unique(np.round(np.linspace(0, len(values) - 1, resolution)).astype(int))
        return [values[i] for i in idx]


@dataclass(frozen=True)
class Categorical:
    name: str
    choices: tuple

    def __post_init__(self):
        if len(self.choices) == 0:
            raise SearchSpaceError(f"{self.name}: choices must be non-empty")
        object.__setattr__(self, "choices", tuple(self.choices))

    def sample(self, rng):
        return self.choices[int(rng.integers(len(self.choices)))]

    def contains(self, v) -> bool:
        return v in self.choices

    def grid(self, resolution: int | None) -> list:
        return list(self.choices)


@dataclass(frozen=True)
class Conditional:
    """``child`` is active only when parameter ``parent`` takes a value in ``active_when``."""

    parent: str
    active_when: tuple
    child: Any

    def __post_init__(self):
        aw = self.active_when
        if not isinstance(aw, tuple):
            aw = tuple(aw) if isinstance(aw, list) else (aw,)
        object.__setattr__(self, "active_when", aw)

    @property
    def name(self) -> str:
        return self.child.name

    def sample(self, rng):
        return self.child.sample(rng)

    def contains(self, v) -> bool:
        return self.child.contains(v)

    def grid(self, resolution):
        return self.child.grid(resolution)


def base_param(p):
    while isinstance(p, Conditional):
        p = p.child
    return p


class SearchSpace:
    """Ordered parameter list; conditional parents must precede their children."""

    def __init__(self, params):
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise SearchSpaceError(f"duplicate parameter names in {names}")
        seen = set()
        for p in self.params:
            if isinstance(p, Conditional) and p.parent not in seen:
                raise SearchSpaceError(f"{p.name}: parent {p.parent!r} must precede it")
            seen.add(p.name)

    def __len__(self):
        return len(self.params)

    def __iter__(self):
        return iter(self.params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def param(self, name: str):
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    @staticmethod
    def is_active(p, config: dict) -> bool:
        while isinstance(p, Conditional):
            if p.parent not in config or config[p.parent] not in p.active_when:
                return False
            p = p.child
        return True

    def sample(self, rng) -> dict:
        config: dict = {}
        for p in self.params:
            if self.is_active(p, config):
                config[p.name] = p.sample(rng)
        return config

    def validate(self, config: dict) -> None:
        partial: dict = {}
        for p in self.params:
            active = self.is_active(p, partial)
            if active:
                if p.name not in config:
                    raise SearchSpaceError(f"missing active parameter {p.name!r}")
                if not p.contains(config[p.name]):
                    raise SearchSpaceError(f"{p.name}={config[p.name]!r} out of bounds")
                partial[p.name] = config[p.name]
            elif p.name in config:
                raise SearchSpaceError(f"inactive parameter {p.name!r} present")
        extra = set(config) - set(self.names)
        if extra:
            raise SearchSpaceError(f"unknown parameters {sorted(extra)}")

    def grid(self, resolution=None) -> Iterator[dict]:
        """Cartesian product in lexicographic order (first parameter slowest).

        ``resolution`` is an int applied to every continuous dimension or a
        per-name mapping.
        """
        if not self.params:
            raise SearchSpaceError("empty search space")

        def res(p):
            if isinstance(resolution, dict):
                return resolution.get(p.name)
            return resolution

        def expand(i: int, config: dict):
            if i == len(self.params):
                yield dict(config)
                return
            p = self.params[i]
            if not self.is_active(p, config):
                yield from expand(i + 1, config)
                return
            for v in p.grid(res(p)):
                config[p.name] = v
                yield from expand(i + 1, config)
                del config[p.name]

        yield from expand(0, {})

    def size(self, resolution=None) -> int:
        return sum(1 for _ in self.grid(resolution))

    # -- JSON ----------------------------------------------------------------
    def to_list(self) -> list[dict]:
        return [_param_to_dict(p) for p in self.params]

    @classmethod
    def from_list(cls, items) -> "SearchSpace":
        return cls([_param_from_dict(d) for d in items])


def _param_to_dict(p) -> dict:
    if isinstance(p, Conditional):
        return {"type": "conditional", "parent": p.parent, "active_when": list(p.active_when),
                "child": _param_to_dict(p.child)}
    if isinstance(p, Continuous):
        return {"type": "continuous", "name": p.name, "lo": p.lo, "hi": p.hi, "log": p.log}
    if isinstance(p, Integer):
        return {"type": "integer", "name": p.name, "lo": p.lo, "hi": p.hi}
    return {"type": "categorical", "name": p.name, "choices": list(p.choices)}


def _param_from_dict(d: dict):
    kind = d.get("type")
    if kind == "continuous":
        return Continuous(d["name"], float(d["lo"]), float(d["hi"]), bool(d.get("log", False)))
    if kind == "integer":
        return Integer(d["name"], int(d["lo"]), int(d["hi"]))
    if kind == "categorical":
        return Categorical(d["name"], tuple(d["choices"]))
    if kind == "conditional":
        return Conditional(d["parent"], tuple(d["active_when"]), _param_from_dict(d["child"]))
    raise SearchSpaceError(f"unknown parameter type {kind!r}")


@dataclass
class Trial:
    algorithm: str
    config: dict
    loss: float
    wall_time: float = 0.0
    status: str = "Ok"
    metrics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status == "Failed":
            self.loss = math.inf

    @property
    def ok(self) -> bool:
        return self.status == "Ok"

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {"algorithm": self.algorithm, "config": self.config,
             "loss": None if math.isinf(self.loss) else self.loss,
             "status": self.status, "metrics": self.metrics}
        if include_timing:
            d["wall_time"] = self.wall_time
        return d


@dataclass
class TrialHistory:
    trials: list[Trial] = field(default_factory=list)
    gamma: float = 0.25

    def __len__(self):
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    def add(self, trial: Trial) -> None:
        self.trials.append(trial)

    @property
    def completed(self) -> list[Trial]:
        return [t for t in self.trials if t.ok]

    def best(self) -> Trial:
        """Minimum-loss trial; the earliest wins ties."""
        if not self.trials:
            raise SearchSpaceError("empty trial history")
        return min(self.trials, key=lambda t: t.loss)
