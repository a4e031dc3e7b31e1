"""Exception hierarchy. Each family maps to one CLI exit code."""


class DriftIdsError(Exception):
    exit_code = 1


# ingest (exit 2)
class IngestError(DriftIdsError):
    exit_code = 2


class BadMagic(IngestError):
    pass


class TruncatedPacket(IngestError):
    pass


class UnsupportedLinkType(IngestError):
    pass


class SchemaMismatch(IngestError):
    pass


class UnparsableRow(IngestError):
    def __init__(self, row_index, reason):
        super().__init__(f"row {row_index}: {reason}")
        self.row_index = row_index
        self.reason = reason


class EmptyWindow(IngestError):
    pass


# synthesis (exit 3)
class SynthesisError(DriftIdsError):
    exit_code = 3


class InsufficientPool(SynthesisError):
    def __init__(self, pool_id, label, needed, available):
        super().__init__(
            f"pool {pool_id!r} has {available} {label} samples, {needed} needed"
        )
        self.pool_id = pool_id
        self.label = label
        self.needed = needed
        self.available = available


class InvalidSpec(SynthesisError):
    pass


class InvalidDescriptor(SynthesisError):
    pass


# evaluation / learning (exit 4)
class EvaluationError(DriftIdsError):
    exit_code = 4


class EmptyStream(EvaluationError):
    pass


class TooFewRuns(EvaluationError):
    pass


class SingleClassTrainingSet(EvaluationError):
    pass


class ModelFrozen(EvaluationError):
    pass


class OutOfRange(ValueError):
    """Input to a bounded-signal detector fell outside [0, 1]."""


class SnapshotVersionError(DriftIdsError):
    pass


class SchemaVersionError(DriftIdsError):
    pass
