"""Exception hierarchy shared by all driftml modules."""


class DriftMLError(Exception):
    """Base class for every error raised by driftml."""


class SchemaError(DriftMLError):
    """A dataset, instance or schema violates a structural invariant."""


class CsvError(DriftMLError):
    """A CSV file could not be ingested.

    ``row`` is the 1-based data-row index (header excluded) and ``column`` the
    offending column name, when known.
    """

    def __init__(self, message, path=None, row=None, column=None):
        super().__init__(message)
        self.path = path
        self.row = row
        self.column = column


class UnreadableFileError(CsvError):
    pass


class RaggedRowError(CsvError):
    pass


class HintMismatchError(CsvError):
    pass


class SpecError(DriftMLError):
    """Invalid stream specification; ``problems`` maps field name to reason."""

    def __init__(self, problems):
        self.problems = dict(problems)
        detail = "; ".join(f"{k}: {v}" for k, v in self.problems.items())
        super().__init__(f"invalid stream spec ({detail})")


class PreprocessError(DriftMLError):
    pass


class UnseenCategoryError(PreprocessError):
    def __init__(self, column, category):
        super().__init__(f"unseen category {category!r} in column {column!r}")
        self.column = column
        self.category = category


class NotFittedError(DriftMLError):
    pass


class SearchSpaceError(DriftMLError):
    pass


class AllTrialsFailedError(DriftMLError):
    pass


class ConfigError(DriftMLError):
    """Pipeline configuration is invalid or references missing inputs."""


class StageError(DriftMLError):
    """A pipeline stage failed; carries the partial report built so far."""

    def __init__(self, stage, cause, report=None):
        super().__init__(f"pipeline failed at stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause
        self.report = report
