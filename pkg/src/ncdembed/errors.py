"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to.
"""

from __future__ import annotations


class NcdError(Exception):
    exit_code = 1


class DataError(NcdError, ValueError):
    """Input data violates a precondition (exit code 2)."""

    exit_code = 2


class FormatError(NcdError, ValueError):
    """A persisted artifact is corrupt or has the wrong magic (exit code 4)."""

    exit_code = 4


class ConsistencyError(NcdError, ValueError):
    """Artifacts or arrays do not line up with each other (exit code 5)."""

    exit_code = 5


class MissingColumn(DataError):
    def __init__(self, column: str):
        super().__init__(f"missing column {column!r} in header")
        self.column = column


class EmptySequence(DataError):
    def __init__(self, row: int):
        super().__init__(f"empty sequence in row {row}")
        self.row = row


class DuplicateId(DataError):
    def __init__(self, record_id: str):
        super().__init__(f"duplicate id {record_id!r}")
        self.record_id = record_id


class UnlabeledSequence(DataError):
    def __init__(self, record_id: str):
        super().__init__(f"sequence {record_id!r} has no label")
        self.record_id = record_id


class MalformedFasta(DataError):
    def __init__(self, line: int, reason: str = "sequence data before first header"):
        super().__init__(f"malformed FASTA at line {line}: {reason}")
        self.line = line


class EmptyDataset(DataError):
    def __init__(self, what: str = "dataset"):
        super().__init__(f"{what} is empty")


class ZeroLength(DataError):
    pass


class NonPositiveSigma(DataError):
    pass


class DegenerateKernel(DataError):
    pass


class ClassTooSmall(DataError):
    def __init__(self, label: str, size: int):
        super().__init__(f"class {label!r} has only {size} members (need >= 4)")
        self.label = label


class SingleClassTraining(DataError):
    pass


class EmptyClass(DataError):
    pass


class KTooLarge(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class LengthMismatch(ConsistencyError):
    pass


class DimensionMismatch(ConsistencyError):
    pass


class AsymmetricInput(ConsistencyError):
    pass


class IdMismatch(ConsistencyError):
    pass
