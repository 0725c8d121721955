import numpy as np
import pytest

from driftml.stream import (Column, ConceptSpec, Condition, Dataset, DriftKind, DriftStreamSpec,
                            Kind, Schema)


def numeric_dataset(X, y, n_classes=None, names=None, labels=None):
    """Dataset with numeric features x0..x{F-1} and label column "y"."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.int64)
    names = names or [f"x{j}" for j in range(X.shape[1])]
    C = n_classes or int(y.max()) + 1
    labels = labels or tuple(str(c) for c in range(C))
    cols = tuple(Column(n, Kind.NUMERIC) for n in names) + (Column("y", Kind.CATEGORICAL, labels),)
    return Dataset(Schema(cols, "y", labels), X, y)


def two_concept_spec(kind=DriftKind.SUDDEN, segment=1000, noise=0.0, seed=0, n_features=3,
                     n_instances=None, transition=0):
    return DriftStreamSpec(
        drift_kind=kind,
        concepts=(ConceptSpec((Condition(0, ">", 0.5),)), ConceptSpec((Condition(1, ">", 0.5),))),
        segment_length=segment,
        transition_length=transition,
        noise_rate=noise,
        seed=seed,
        n_features=n_features,
        n_instances=n_instances,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
