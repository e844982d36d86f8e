"""Exception types shared across the package."""


class GtepError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(GtepError, ValueError):
    """A call violated a documented precondition."""


class InvalidStateError(GtepError, RuntimeError):
    """An object was used before it reached a valid state (e.g. unreset predictor)."""


class UndefinedMetricError(GtepError, ValueError):
    """A metric is mathematically undefined for the given inputs (constant series, zero denominators)."""


class CsvParseError(GtepError, ValueError):
    """A telemetry CSV row failed to parse. Carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class CsvSchemaError(GtepError, ValueError):
    """A telemetry CSV violated the schema (header mismatch, empty body, non-monotone time)."""


class ModelFormatError(GtepError, ValueError):
    """A model file has bad magic bytes or is otherwise not a model file."""


class ModelVersionError(GtepError, ValueError):
    """A model file declares an unsupported format version."""


class ModelLengthError(GtepError, ValueError):
    """A model file is truncated or padded. Carries expected and actual byte counts."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"expected {expected} bytes, file has {actual}")


class TrainingDivergedError(GtepError, RuntimeError):
    """Training produced a non-finite loss. Carries epoch and batch indices."""

    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
