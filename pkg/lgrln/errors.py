"""Exception hierarchy for the summarization pipeline.

Every error carries the process exit code the CLI maps it to.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class LgrlnError(Exception):
    """Base class for all pipeline errors."""

    exit_code = EXIT_USAGE


class DimensionError(LgrlnError, ValueError):
    """Raised when tensor or vector extents do not agree."""


class ConfigurationError(LgrlnError, ValueError):
    """Raised for invalid configuration values."""


class ContractError(LgrlnError, ValueError):
    """Raised when an operation is called outside its documented contract."""


class TapeStateError(LgrlnError, RuntimeError):
    """Raised when a gradient tape is reused after its backward pass."""


class CapacityError(LgrlnError, ValueError):
    """Raised when a lookup exceeds a fixed-size table."""


class DatasetLoadError(LgrlnError):
    """Raised when a dataset manifest or one of its blobs is invalid."""

    exit_code = EXIT_DATA

    def __init__(self, message: str, path: str | None = None, field: str | None = None):
        self.reason = message
        self.path = path
        self.field = field
        parts = [message]
        if path:
            parts.append(f"path={path}")
        if field:
            parts.append(f"field={field}")
        super().__init__(" | ".join(parts))


class CheckpointError(LgrlnError):
    """Raised when a checkpoint is unreadable or does not fit the input."""

    exit_code = EXIT_DATA


class NumericFailure(LgrlnError, ArithmeticError):
    """Raised when training diverges or a numeric check fails."""

    exit_code = EXIT_NUMERIC

    def __init__(self, message: str, video_id: str | None = None, epoch: int | None = None):
        self.video_id = video_id
        self.epoch = epoch
        super().__init__(message)


class UndefinedCorrelationError(LgrlnError, ValueError):
    """Raised when a rank correlation is requested for a constant vector."""
