"""Exception types shared across the riddleforge pipeline."""


class RiddleforgeError(Exception):
    """Base class for all riddleforge errors."""


class EmptyTerm(RiddleforgeError):
    """Raised when a term is empty or normalizes to the empty string."""


class MalformedRecord(RiddleforgeError):
    """A single assertion record that could not be parsed.

    Carries the 1-based line number of the offending record.
    """

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class TooManyMalformedRecords(RiddleforgeError):
    """Raised when the malformed-record fraction exceeds the configured cap."""


class UnmappedRelation(RiddleforgeError):
    """A relation has no surface template and is not on the skip list."""

    def __init__(self, relation: str):
        super().__init__(f"no template for relation {relation!r}")
        self.relation = relation


class StepOutOfRange(RiddleforgeError):
    """A schedule was queried outside [0, total_steps]."""


class InvalidP(RiddleforgeError):
    """Mixing proportion outside [0, 1]."""


class InvalidBatch(RiddleforgeError):
    """Non-positive batch size."""


class InsufficientData(RiddleforgeError):
    """A holdout fraction produced an empty partition."""


class PoolExhausted(RiddleforgeError):
    """Negative mining could not reach the requested count even with fallbacks."""


class NoPositive(RiddleforgeError):
    """A benchmark query has an empty positive pool."""


class MissingScore(RiddleforgeError):
    """A (query, candidate) pair has no score in the score matrix."""

    def __init__(self, query_id: str, candidate_id: str):
        super().__init__(f"no score for query {query_id!r}, candidate {candidate_id!r}")
        self.query_id = query_id
        self.candidate_id = candidate_id


class SnapshotFormatError(RiddleforgeError):
    """A graph snapshot file is corrupt or has an unsupported version."""
