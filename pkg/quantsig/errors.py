"""Exception hierarchy for quantsig.

Every error belongs to one of three families, and the family decides the
process exit code when it escapes a CLI command:

    UsageError     -> 1
    DataError      -> 2
    TrainingError  -> 3
"""

from typing import Optional


class QuantSigError(Exception):
    """Base class for all quantsig errors."""

    exit_code = 3


class UsageError(QuantSigError):
    exit_code = 1


class DataError(QuantSigError):
    exit_code = 2


class TrainingError(QuantSigError):
    exit_code = 3


# --- usage / configuration ---

class ConfigError(UsageError, ValueError):
    pass


class LeakageError(ConfigError):
    """A configuration asked to fit a scaler or PCA on non-training rows."""


# --- data acquisition and parsing ---

class MalformedHeader(DataError, ValueError):
    pass


class MalformedNumber(DataError, ValueError):
    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}: column {column!r} has non-numeric value {value!r}")


class DuplicateDate(DataError, ValueError):
    def __init__(self, date):
        self.date = date
        super().__init__(f"duplicate date {date}")


class EmptySeries(DataError, ValueError):
    pass


class NetworkError(DataError):
    pass


class SymbolNotFound(DataError):
    def __init__(self, symbol: str, url: Optional[str] = None):
        self.symbol = symbol
        self.url = url
        super().__init__(f"symbol {symbol!r} not found" + (f" at {url}" if url else ""))


class MissingColumn(DataError, ValueError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"missing column {column!r}")


class EmptyCorpus(DataError, ValueError):
    pass


class MissingMetrics(DataError):
    def __init__(self, directories):
        self.directories = directories
        super().__init__(f"no metrics.csv in any run under {directories}")


class FileAccessError(DataError):
    """An input file could not be opened, read or written."""

    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"cannot access {path}: {reason}")


class MissingManifest(DataError):
    def __init__(self, directory):
        self.directory = directory
        super().__init__(f"no manifest.txt in {directory}")


# --- numerical preconditions ---

class WindowTooLarge(TrainingError, ValueError):
    pass


class SpanTooLarge(TrainingError, ValueError):
    pass


class LengthMismatch(TrainingError, ValueError):
    pass


class InsufficientHistory(TrainingError, ValueError):
    pass


class ColumnMismatch(TrainingError, ValueError):
    pass


class ZeroVariance(TrainingError, ValueError):
    pass


class NonFiniteValues(TrainingError, ValueError):
    pass


class BadFractions(ConfigError):
    pass


class TooManyComponents(TrainingError, ValueError):
    pass


class EmptyVocabulary(TrainingError, ValueError):
    pass


class ShapeMismatch(TrainingError, ValueError):
    pass


class SingleClass(TrainingError, ValueError):
    pass


# --- training ---

class SingularSystem(TrainingError):
    pass


class SeriesTooShort(TrainingError, ValueError):
    pass


class DivergedLoss(TrainingError):
    pass


class SingleClassTraining(TrainingError, ValueError):
    pass


class NonBinaryFeatures(TrainingError, ValueError):
    pass


# --- model files ---

class BadMagic(DataError):
    pass


class VersionUnsupported(DataError):
    pass


class CorruptRecord(DataError):
    pass
