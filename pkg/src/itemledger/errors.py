"""Domain error hierarchy.

Every error the engine raises on a rejected operation derives from
LedgerError so callers (gateway, CLI) can map them uniformly. Rejected
operations never append events.
"""


class LedgerError(Exception):
    """Base class for all domain errors."""


class InvalidGraph(LedgerError):
    """Workflow definition failed validation; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        detail = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid workflow graph: {detail}")


class DuplicateName(LedgerError):
    pass


class DuplicateElement(LedgerError):
    pass


class SchemaViolation(LedgerError):
    pass


class UnknownDescription(LedgerError):
    pass


class UnknownVersion(LedgerError):
    pass


class UnknownItem(LedgerError):
    pass


class UnknownActivity(LedgerError):
    pass


class UnknownDataset(LedgerError):
    pass


class UnknownElement(LedgerError):
    pass


class UnknownPipeline(LedgerError):
    pass


class UnknownAnalysis(LedgerError):
    pass


class UnknownJob(LedgerError):
    pass


class UnknownField(LedgerError):
    pass


class UnknownKind(LedgerError):
    pass


class TypeMismatch(LedgerError):
    pass


class IllegalTransition(LedgerError):
    pass


class NotEnabled(LedgerError):
    pass


class ActiveConflict(LedgerError):
    pass


class NotOwner(LedgerError):
    pass


class NotVisible(LedgerError):
    pass


class EmptySelection(LedgerError):
    pass


class IncompleteDefinition(LedgerError):
    pass


class NotTerminal(LedgerError):
    pass


class StorageFailure(LedgerError):
    pass


class CorruptLog(LedgerError):
    """Log file could not be replayed; reports the offending line number."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"corrupt log at line {line_number}: {reason}")
