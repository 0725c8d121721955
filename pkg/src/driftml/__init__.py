"""Drift-adaptive AutoML for tabular data and data streams.

Subpackages and modules
-----------------------
stream      data model, CSV ingestion, synthetic drift streams
preprocess  imputation, encoding, normalization, SMOTE
features    information-gain and correlation feature selection
offline     NB, KNN, CART and random forest
online      incremental learners and drift-adaptive ensembles
drift       ADWIN, DDM, EDDM and window-distance detectors
cash        search spaces, grid/random/TPE optimizers, two-stage CASH
evaluation  metrics, cross-validation, prequential evaluation
pipeline    config-driven end-to-end runs
"""

__version__ = "0.1.0"

from .errors import DriftMLError  # noqa: E402
from .stream import Dataset, Instance, Schema  # noqa: E402

__all__ = ["Dataset", "DriftMLError", "Instance", "Schema", "__version__"]
