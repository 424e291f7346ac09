"""Exception hierarchy.

Three CLI-visible buckets: ConfigError (bad configuration, exit 2),
DataError (malformed or unusable data, exit 3), RuntimeFailure
(numerical or execution trouble, exit 4).
"""


class RecbenchError(Exception):
    """Base class; carries an optional pipeline stage tag."""

    stage: str | None = None


class ConfigError(RecbenchError):
    pass


class DataError(RecbenchError):
    pass


class RuntimeFailure(RecbenchError):
    pass


# --- atomic files ---

class MalformedHeader(DataError):
    pass


class RowArityMismatch(DataError):
    pass


class NumericParseError(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


# --- filtering ---

class RelationIdOverflow(DataError):
    pass


# --- feature codec ---

class EmptyColumn(DataError):
    pass


class NaNValue(DataError):
    pass


class NonPositiveAfterShift(DataError):
    pass


# --- sequence transforms ---

class EmptySequence(DataError):
    pass


class SequenceTooLong(DataError):
    pass


class PadNotLast(ConfigError):
    pass


# --- negative sampling ---

class NoNegativesAvailable(DataError):
    pass


class AllDegreesZero(DataError):
    pass


class AllZeroWeights(DataError):
    pass


# --- split / loading ---

class MissingTimestamp(DataError):
    pass


# --- training ---

class DivergenceDetected(RuntimeFailure):
    pass


# --- tuning ---

class ContinuousDomainInGrid(ConfigError):
    pass


class TrialFailed(RuntimeFailure):
    pass
