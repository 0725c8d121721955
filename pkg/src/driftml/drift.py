"""Concept drift detectors.

Performance-based detectors (DDM, EDDM) consume a 0/1 loss per instance.
Distribution-based detectors (ADWIN, the entropy/KL window pair) consume a
bounded real value. Every detector returns a :class:`Status` from ``update``.
"""

from __future__ import annotations

import enum
import math
from collections import deque

import numpy as np


class Status(str, enum.Enum):
    STABLE = "Stable"
    WARNING = "Warning"
    DRIFT = "Drift"


def _check_binary(error) -> int:
    if error == 0 or error == 1:
        return int(error)
    raise ValueError(f"expected a 0/1 loss, got {error!r}")


class DriftDetector:
    """Common interface: ``update(value) -> Status`` and ``reset()``."""

    def update(self, value) -> Status:  # pragma: no cover - abstract
        raise NotImplementedError

    def reset(self) -> None:  # pragma: no cover - abstract
        raise NotImplementedError

    def clone(self) -> "DriftDetector":
        """Fresh detector with the same configuration."""
        raise NotImplementedError


class DDM(DriftDetector):
    """Drift Detection Method over a binomial error rate.

    Parameters
    ----------
    min_instances : int
        No signal is emitted before this many losses were seen.
    warning_level, drift_level : float
        Multiples of ``s_min`` added to ``p_min`` for the two thresholds.
    """

    def __init__(self, min_instances=30, warning_level=2.0, drift_level=3.0):
        self.min_instances = min_instances
        self.warning_level = warning_level
        self.drift_level = drift_level
        self.reset()

    def reset(self):
        self.n = 0
        self.p = 0.0
        self.s = 0.0
        self.p_min = math.inf
        self.s_min = math.inf

    def clone(self):
        return DDM(self.min_instances, self.warning_level, self.drift_level)

    def state(self) -> tuple:
        return (self.n, self.p, self.s, self.p_min, self.s_min)

    def update(self, error) -> Status:
        e = _check_binary(error)
        self.n += 1
        self.p += (e - self.p) / self.n
        self.s = math.sqrt(self.p * (1.0 - self.p) / self.n)
        if self.n < self.min_instances:
            return Status.STABLE
        level = self.p + self.s
        if level <= self.p_min + self.s_min:
            self.p_min = self.p
            self.s_min = self.s
            return Status.STABLE
        if level >= self.p_min + self.drift_level * self.s_min:
            self.reset()
            return Status.DRIFT
        if level >= self.p_min + self.warning_level * self.s_min:
            return Status.WARNING
        return Status.STABLE


class EDDM(DriftDetector):
    """Early Drift Detection Method over distances between consecutive errors."""

    def __init__(self, warning_ratio=0.95, drift_ratio=0.9, min_errors=30):
        self.warning_ratio = warning_ratio
        self.drift_ratio = drift_ratio
        self.min_errors = min_errors
        self.reset()

    def reset(self):
        self.t = 0
        self.n_errors = 0
        self.last_error = None
        self.n_gaps = 0
        self.mean = 0.0
        self._m2 = 0.0
        self.max_level = 0.0

    def clone(self):
        return EDDM(self.warning_ratio, self.drift_ratio, self.min_errors)

    @property
    def std(self) -> float:
        return math.sqrt(self._m2 / self.n_gaps) if self.n_gaps else 0.0

    def update(self, error) -> Status:
        e = _check_binary(error)
        self.t += 1
        if not e:
            return Status.STABLE
        self.n_errors += 1
        if self.last_error is None:
            self.last_error = self.t
            return Status.STABLE
        gap = self.t - self.last_error
        self.last_error = self.t
        self.n_gaps += 1
        delta = gap - self.mean
        self.mean += delta / self.n_gaps
        self._m2 += delta * (gap - self.mean)
        level = self.mean + 2.0 * self.std
        if level > self.max_level:
            self.max_level = level
            return Status.STABLE
        if self.n_errors < self.min_errors:
            return Status.STABLE
        ratio = level / self.max_level
        if ratio < self.drift_ratio:
            self.reset()
            return Status.DRIFT
        if ratio < self.warning_ratio:
            return Status.WARNING
        return Status.STABLE


class ADWIN(DriftDetector):
    """Adaptive windowing over an exponential histogram.

    Bucket row ``i`` holds up to ``max_buckets`` buckets of ``2**i`` values
    each; only their sums are stored, so the window sum and width are exact.
    Every admissible cut between an older sub-window and a newer one is tested
    after each insertion.

    Parameters
    ----------
    delta : float
        Confidence parameter.
    max_buckets : int
        Row capacity before the two oldest buckets merge.
    value_range : tuple of float
        Known bounds of the monitored value; the cut threshold scales with
        their difference.

    Attributes
    ----------
    last_change : int
        +1 if the most recent drift raised the mean, -1 if it lowered it.
    """

    def __init__(self, delta=0.002, max_buckets=5, value_range=(0.0, 1.0)):
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        self.delta = delta
        self.max_buckets = max_buckets
        self.value_range = (float(value_range[0]), float(value_range[1]))
        self._R = self.value_range[1] - self.value_range[0]
        self.reset()

    def reset(self):
        self.rows: list[list[float]] = [[]]
        self.width = 0
        self.total = 0.0
        self.n_detections = 0
        self.last_change = 0

    def clone(self):
        return ADWIN(self.delta, self.max_buckets, self.value_range)

    @property
    def estimation(self) -> float:
        return self.total / self.width if self.width else 0.0

    def buckets(self):
        """(sum, count) pairs from oldest to newest."""
        out = []
        for i in range(len(self.rows) - 1, -1, -1):
            size = 1 << i
            out.extend((s, size) for s in self.rows[i])
        return out

    def _insert(self, value: float):
        self.rows[0].append(value)
        self.width += 1
        self.total += value
        M = self.max_buckets
        i = 0
        while len(self.rows[i]) > M:
            row = self.rows[i]
            merged = row[0] + row[1]
            del row[:2]
            if i + 1 == len(self.rows):
                self.rows.append([])
            self.rows[i + 1].append(merged)
            i += 1

    def _find_cut(self) -> int:
        """Sign of the mean change at the first triggering cut, 0 if none."""
        n = self.width
        if n < 2:
            return 0
        total = self.total
        log_term = math.log(4.0 * n / self.delta)
        R2 = self._R * self._R
        n0 = 0
        s0 = 0.0
        rows = self.rows
        for i in range(len(rows) - 1, -1, -1):
            size = 1 << i
            for s in rows[i]:
                n0 += size
                s0 += s
                n1 = n - n0
                if n1 <= 0:
                    return 0
                diff = (total - s0) / n1 - s0 / n0
                # m = 1 / (1/n0 + 1/n1); eps^2 = R^2 ln(4/delta') / (2m)
                if diff * diff >= R2 * log_term * (1.0 / n0 + 1.0 / n1) * 0.5:
                    return 1 if diff > 0 else -1
        return 0

    def _drop_oldest(self):
        i = len(self.rows) - 1
        while i > 0 and not self.rows[i]:
            self.rows.pop()
            i -= 1
        s = self.rows[i].pop(0)
        self.width -= 1 << i
        self.total -= s
        while len(self.rows) > 1 and not self.rows[-1]:
            self.rows.pop()

    def update(self, value) -> Status:
        v = float(value)
        lo, hi = self.value_range
        if not (lo <= v <= hi):
            raise ValueError(f"ADWIN input {value!r} outside range {self.value_range}")
        self._insert(v)
        direction = self._find_cut()
        if not direction:
            return Status.STABLE
        self.last_change = direction
        self.n_detections += 1
        while True:
            self._drop_oldest()
            if not self._find_cut():
                break
        return Status.DRIFT


def _check_distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("expected a normalized probability vector")
    return p


def entropy(h) -> float:
    """Base-2 entropy with 0 log 0 = 0."""
    h = _check_distribution(h)
    nz = h[h > 0]
    return float(-(nz * np.log2(nz)).sum())


def ie_distance(p, q) -> float:
    return abs(entropy(p) - entropy(q))


def smooth(q, eps=1e-6) -> np.ndarray:
    q = np.asarray(q, dtype=float) + eps
    return q / q.sum()


def kl_divergence(p, q, eps=1e-6) -> float:
    """D_KL(p || q) in bits; ``q`` is add-eps smoothed and renormalized."""
    p = _check_distribution(p)
    q = smooth(_check_distribution(q), eps)
    if p.shape != q.shape:
        raise ValueError("distributions must have the same number of bins")
    nz = p > 0
    return float((p[nz] * np.log2(p[nz] / q[nz])).sum())


class WindowDistanceDetector(DriftDetector):
    """Reference-vs-current histogram detector using IE or KL distance.

    The first ``n_reference`` values freeze the reference histogram; a sliding
    window of ``n_current`` values follows. Once the current window is full,
    a distance above ``threshold`` signals drift and the reference is
    re-frozen from the current window. Values outside ``value_range`` are
    clamped to the edge bins and counted in ``n_clamped``.
    """

    def __init__(self, metric="KL", threshold=0.1, n_bins=10, value_range=(0.0, 1.0),
                 n_reference=200, n_current=None, eps=1e-6):
        if metric not in ("IE", "KL"):
            raise ValueError("metric must be 'IE' or 'KL'")
        self.metric = metric
        self.threshold = threshold
        self.n_bins = n_bins
        self.value_range = (float(value_range[0]), float(value_range[1]))
        self.n_reference = n_reference
        self.n_current = n_current or n_reference
        self.eps = eps
        self.reset()

    def reset(self):
        self.reference = None
        self._ref_counts = np.zeros(self.n_bins)
        self._ref_seen = 0
        self._window = deque()
        self._cur_counts = np.zeros(self.n_bins)
        self.n_clamped = 0
        self.last_distance = 0.0

    def clone(self):
        return WindowDistanceDetector(self.metric, self.threshold, self.n_bins, self.value_range,
                                      self.n_reference, self.n_current, self.eps)

    def _bin(self, value: float) -> int:
        lo, hi = self.value_range
        if math.isnan(value):
            raise ValueError("NaN input")
        if value < lo or value > hi:
            self.n_clamped += 1
        b = int((value - lo) / (hi - lo) * self.n_bins)
        return min(max(b, 0), self.n_bins - 1)

    def distance(self, p, q) -> float:
        if self.metric == "IE":
            return ie_distance(p, q)
        return kl_divergence(p, q, self.eps)

    def update(self, value) -> Status:
        b = self._bin(float(value))
        if self.reference is None:
            self._ref_counts[b] += 1
            self._ref_seen += 1
            if self._ref_seen == self.n_reference:
                self.reference = self._ref_counts / self._ref_seen
            return Status.STABLE
        self._window.append(b)
        self._cur_counts[b] += 1
        if len(self._window) > self.n_current:
            self._cur_counts[self._window.popleft()] -= 1
        if len(self._window) < self.n_current:
            return Status.STABLE
        current = self._cur_counts / self.n_current
        self.last_distance = self.distance(self.reference, current)
        if self.last_distance > self.threshold:
            self.reference = current.copy()
            return Status.DRIFT
        return Status.STABLE


def make_detector(name: str, **kwargs) -> DriftDetector | None:
    """Build a detector from a config name (``None``/"none" disables)."""
    if name is None or str(name).lower() == "none":
        return None
    key = str(name).upper()
    if key == "ADWIN":
        return ADWIN(**kwargs)
    if key == "DDM":
        return DDM(**kwargs)
    if key == "EDDM":
        return EDDM(**kwargs)
    if key in ("KL", "IE"):
        return WindowDistanceDetector(metric=key, **kwargs)
    raise ValueError(f"unknown drift detector {name!r}")
