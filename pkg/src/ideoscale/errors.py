"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: usage errors exit 1, data errors 2,
numerical failures 3.
"""


class IdeoscaleError(Exception):
    """Base class for all toolkit errors."""


class DataError(IdeoscaleError):
    """Malformed, inconsistent, or insufficient input data (exit code 2)."""


class NumericalError(IdeoscaleError):
    """A computation cannot proceed: degenerate variance, rank deficiency,
    too little data to fit (exit code 3)."""


class PipelineStageError(IdeoscaleError):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
