"""Append-only event store.

Every accepted state change is one EventRecord: the seven-Ws provenance
fields plus a record kind and a self-contained payload. Records are
serialized one per line in the canonical format, so any line prefix of a
log file is itself a valid log and replaying the lines alone rebuilds
the full state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from . import canonical
from .errors import CorruptLog, SchemaViolation, StorageFailure

RECORD_KINDS = frozenset(
    {
        "description.create",
        "description.version",
        "item.create",
        "item.migrate",
        "item.transition",
        "dataset.create",
        "pipeline.create",
        "analysis.create",
        "analysis.dataset",
        "analysis.pipeline",
        "analysis.run",
        "analysis.job",
        "analysis.consolidate",
        "analysis.annotate",
        "analysis.share",
    }
)


@dataclass
class EventRecord:
    """One seven-Ws provenance event plus its replayable payload."""

    seq: int
    kind: str
    who: str
    which_item: str
    which_version: int
    what: str
    when: str
    where: str
    why: str = ""
    how: dict = field(default_factory=dict)
    payload: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "seq": self.seq,
            "kind": self.kind,
            "who": self.who,
            "which": {"item": self.which_item, "version": self.which_version},
            "what": self.what,
            "when": self.when,
            "where": self.where,
            "why": self.why,
            "how": self.how,
            "payload": self.payload,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "EventRecord":
        which = payload["which"]
        return cls(
            seq=payload["seq"],
            kind=payload["kind"],
            who=payload["who"],
            which_item=which["item"],
            which_version=which["version"],
            what=payload["what"],
            when=payload["when"],
            where=payload["where"],
            why=payload.get("why", ""),
            how=dict(payload.get("how", {})),
            payload=dict(payload.get("payload", {})),
        )

    def line(self) -> str:
        return canonical.dumps(self.to_payload())


def check_record(record: EventRecord) -> None:
    """Reject a malformed record before it reaches the log.

    who/which/what/when/where must be populated; why and how are present
    but may be empty.
    """
    if record.kind not in RECORD_KINDS:
        raise SchemaViolation(f"unknown record kind {record.kind!r}")
    if not isinstance(record.seq, int) or record.seq < 1:
        raise SchemaViolation("event seq must be a positive integer")
    for name in ("who", "which_item", "what", "when", "where"):
        value = getattr(record, name)
        if not isinstance(value, str) or not value:
            raise SchemaViolation(f"event field {name!r} must be non-empty")
    if not isinstance(record.which_version, int) or record.which_version < 1:
        raise SchemaViolation("event which.version must be a positive integer")
    if not isinstance(record.why, str):
        raise SchemaViolation("event field 'why' must be text")
    if not isinstance(record.how, dict):
        raise SchemaViolation("event field 'how' must be a map")


class EventLog:
    """Linearized append-only record sequence, optionally file-backed.

    Appends assign seq = previous max + 1 and, when a path is configured,
    write one canonical line per record before the record becomes visible
    in memory.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.records: list[EventRecord] = []
        self._handle = None
        if self.path is not None:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self._handle = open(self.path, "a", encoding="utf-8")
            except OSError as exc:
                raise StorageFailure(f"cannot open log {self.path}: {exc}") from exc

    @property
    def last_seq(self) -> int:
        return self.records[-1].seq if self.records else 0

    def append(self, record: EventRecord) -> int:
        check_record(record)
        if record.seq != self.last_seq + 1:
            raise StorageFailure(f"seq {record.seq} does not extend log at {self.last_seq}")
        if self._handle is not None:
            try:
                self._handle.write(record.line() + "\n")
                self._handle.flush()
            except OSError as exc:
                raise StorageFailure(f"append failed: {exc}") from exc
        self.records.append(record)
        return record.seq

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def read_log(path: str | Path) -> list[EventRecord]:
    """Parse a log file into records.

    A complete line that fails to parse or validate raises CorruptLog with
    its line number. A trailing fragment without a newline that does not
    parse is treated as a torn final write and ignored.
    """
    path = Path(path)
    if not path.exists():
        return []
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageFailure(f"cannot read log {path}: {exc}") from exc

    records: list[EventRecord] = []
    if not raw:
        return records
    complete = raw.endswith("\n")
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for number, line in enumerate(lines, start=1):
        torn_tail = number == len(lines) and not complete
        try:
            payload = canonical.loads(line)
            record = EventRecord.from_payload(payload)
            check_record(record)
        except CorruptLog:
            raise
        except Exception as exc:
            if torn_tail:
                break
            raise CorruptLog(number, str(exc)) from exc
        expected = records[-1].seq + 1 if records else 1
        if record.seq != expected:
            raise CorruptLog(number, f"seq {record.seq}, expected {expected}")
        records.append(record)
    return records
