"""The ledger: single source of truth for one store.

Operations validate against current state, append exactly one record to
the log, then fold that record into state through the same `apply` path
replay uses. Rebuilding from the log therefore reproduces the live
state byte-for-byte under snapshot comparison.

All state-changing calls are serialized by one writer lock; reads see
consistent snapshots between operations.
"""

from __future__ import annotations

import hashlib
import os
import threading
import uuid
from pathlib import Path
from typing import Iterable

from . import canonical
from . import workflow as wf
from .analysis import AnalysisBase
from .clock import AnchoredClock, SystemClock
from .errors import (
    ActiveConflict,
    SchemaViolation,
    UnknownDescription,
    UnknownItem,
    UnknownVersion,
)
from .kernel import (
    BUILTIN_DESCRIPTIONS,
    DescriptionVersion,
    Item,
    ItemDescription,
    Outcome,
    check_properties,
    check_version_payload,
    new_uuid_text,
)
from .store import EventLog, EventRecord, read_log

STORE_ENV = "ITEMLEDGER_STORE"
CLOCK_ENV = "ITEMLEDGER_CLOCK_START"
ID_SEED_ENV = "ITEMLEDGER_ID_SEED"


class Ledger:
    def __init__(self, log_path: str | Path | None = None, clock=None, id_seed: int | None = None, where: str = "local"):
        self.log = EventLog(log_path)
        self.clock = clock or SystemClock()
        if isinstance(self.clock, AnchoredClock):
            self.clock.bind(self.log)
        self.where = where
        self._id_seed = id_seed
        self._id_anchor = -1
        self._id_calls = 0
        self._lock = threading.RLock()
        self.descriptions: dict[str, ItemDescription] = {}
        self.items: dict[str, Item] = {}
        self.outcomes: dict[str, dict[str, Outcome]] = {}
        self.analysis = AnalysisBase(self)

    # -- construction ------------------------------------------------------

    @classmethod
    def open(cls, path: str | Path, clock=None, id_seed: int | None = None, where: str = "local") -> "Ledger":
        """File-backed store: replay whatever the log holds, then append."""
        records = read_log(path)
        ledger = cls(log_path=path, clock=clock, id_seed=id_seed, where=where)
        ledger._absorb(records)
        return ledger

    @classmethod
    def replay(cls, records: Iterable[EventRecord], clock=None, where: str = "local") -> "Ledger":
        """Rebuild in-memory state from records alone."""
        ledger = cls(clock=clock, where=where)
        ledger._absorb(records)
        return ledger

    @classmethod
    def from_env(cls, path: str | Path | None = None, where: str = "local") -> "Ledger":
        """Shared CLI/gateway constructor honoring the env hooks.

        ITEMLEDGER_STORE names the log file; ITEMLEDGER_CLOCK_START and
        ITEMLEDGER_ID_SEED pin time and identifier generation so scripted
        runs on different surfaces produce identical logs.
        """
        path = path or os.environ.get(STORE_ENV)
        if not path:
            raise SchemaViolation(f"no store path: pass one or set {STORE_ENV}")
        clock_start = os.environ.get(CLOCK_ENV)
        clock = AnchoredClock(clock_start) if clock_start else None
        id_seed_text = os.environ.get(ID_SEED_ENV)
        id_seed = int(id_seed_text) if id_seed_text else None
        return cls.open(path, clock=clock, id_seed=id_seed, where=where)

    def _absorb(self, records: Iterable[EventRecord]) -> None:
        for record in records:
            self.log.records.append(record)
            self._apply(record)

    def close(self) -> None:
        self.log.close()

    # -- shared plumbing ---------------------------------------------------

    def new_id(self) -> str:
        """Fresh identifier; with a seed, derived from the log position so
        identical operation scripts mint identical ids across restarts."""
        if self._id_seed is None:
            return str(uuid.uuid4())
        anchor = self.log.last_seq
        if anchor != self._id_anchor:
            self._id_anchor = anchor
            self._id_calls = 0
        material = f"{self._id_seed}:{anchor}:{self._id_calls}".encode("ascii")
        self._id_calls += 1
        digest = hashlib.sha256(material).digest()
        return new_uuid_text(int.from_bytes(digest[:16], "big"))

    @property
    def events(self) -> list[EventRecord]:
        return self.log.records

    def commit(
        self,
        kind: str,
        who: str,
        which: tuple[str, int],
        what: str,
        where: str | None = None,
        why: str = "",
        how: dict | None = None,
        payload: dict | None = None,
        when: str | None = None,
    ) -> EventRecord:
        """Append one validated record and fold it into state."""
        if not who or not isinstance(who, str):
            raise SchemaViolation("agent id must be non-empty text")
        record = EventRecord(
            seq=self.log.last_seq + 1,
            kind=kind,
            who=who,
            which_item=which[0],
            which_version=which[1],
            what=what,
            when=when or self.clock.now(),
            where=where or self.where,
            why=why,
            how=how or {},
            payload=payload or {},
        )
        # payload must survive the wire format, or replay could diverge
        roundtrip = canonical.loads(record.line())
        if roundtrip != record.to_payload():
            raise SchemaViolation("record payload does not round-trip canonically")
        with self._lock:
            self.log.append(record)
            self._apply(record)
        return record

    def _apply(self, record: EventRecord) -> None:
        kind = record.kind
        if kind == "description.create":
            payload = record.payload
            version = DescriptionVersion.from_payload(payload["version"])
            self.descriptions[payload["description"]] = ItemDescription(
                id=payload["description"], name=payload["name"], versions=[version]
            )
        elif kind == "description.version":
            payload = record.payload
            self.descriptions[payload["description"]].versions.append(
                DescriptionVersion.from_payload(payload["version"])
            )
        elif kind == "item.create":
            payload = record.payload
            self.create_item_state(
                item_id=payload["item"],
                description_id=payload["description"],
                version=payload["version"],
                properties=dict(payload["properties"]),
            )
        elif kind == "item.migrate":
            payload = record.payload
            item = self.items[payload["item"]]
            target = self._description(item.description_id).version(payload["to"])
            item.description_version = payload["to"]
            item.workflow = _migrate_instance(
                item.workflow, target.workflow_def, (item.description_id, payload["to"])
            )
        elif kind == "item.transition":
            payload = record.payload
            item = self.items[payload["item"]]
            version = self._description(item.description_id).version(item.description_version)
            result = wf.apply_transition(
                version.workflow_def,
                item.workflow,
                payload["activity"],
                payload["transition"],
                outcome_fields=payload.get("outcome"),
                outcome_schemas=version.outcome_schemas,
            )
            if result.outcome_fields is not None:
                self.outcomes.setdefault(item.id, {})[payload["activity"]] = Outcome(
                    item=item.id,
                    activity=payload["activity"],
                    fields=result.outcome_fields,
                    event_seq=record.seq,
                )
        else:
            self.analysis.apply(record)
        if record.which_item in self.items:
            self.items[record.which_item].event_seq += 1

    def create_item_state(self, item_id: str, description_id: str, version: int, properties: dict) -> Item:
        defn = self._description(description_id).version(version).workflow_def
        item = Item(
            id=item_id,
            description_id=description_id,
            description_version=version,
            properties=properties,
            workflow=wf.instantiate_workflow(defn, (description_id, version)),
        )
        self.items[item_id] = item
        return item

    def _description(self, description_id: str) -> ItemDescription:
        description = self.descriptions.get(description_id) or BUILTIN_DESCRIPTIONS.get(description_id)
        if description is None:
            raise UnknownDescription(f"no description {description_id!r}")
        return description

    # -- kernel operations ---------------------------------------------------

    def register_description(self, name: str, version_payload: dict, agent: str, where: str | None = None):
        """New versioned description; its first version is always 1."""
        if not name or not isinstance(name, str):
            raise SchemaViolation("description name must be non-empty text")
        payload = _isolated(version_payload)
        check_version_payload(payload)
        when = self.clock.now()
        description_id = self.new_id()
        payload.update({"number": 1, "created_by": agent, "created_at": when})
        self.commit(
            kind="description.create",
            who=agent,
            which=(description_id, 1),
            what="Create",
            where=where,
            when=when,
            payload={"description": description_id, "name": name, "version": payload},
        )
        return description_id, 1

    def add_description_version(self, description_id: str, version_payload: dict, agent: str, where: str | None = None) -> int:
        """Append-only evolution: returns previous max version + 1."""
        description = self.descriptions.get(description_id)
        if description is None:
            raise UnknownDescription(f"no description {description_id!r}")
        payload = _isolated(version_payload)
        check_version_payload(payload)
        when = self.clock.now()
        number = len(description.versions) + 1
        payload.update({"number": number, "created_by": agent, "created_at": when})
        self.commit(
            kind="description.version",
            who=agent,
            which=(description_id, number),
            what="AddVersion",
            where=where,
            when=when,
            how={"version": number},
            payload={"description": description_id, "version": payload},
        )
        return number

    def resolve_description(self, description_id: str, version: int) -> DescriptionVersion:
        description = self._description(description_id)
        found = description.version(version)
        if found is None:
            raise UnknownVersion(f"description {description_id!r} has no version {version}")
        return found

    def instantiate_item(self, description_id: str, version: int, properties: dict, agent: str, where: str | None = None) -> Item:
        pinned = self.resolve_description(description_id, version)
        properties = dict(properties)
        check_properties(properties, pinned.property_schema, "item properties")
        item_id = self.new_id()
        self.commit(
            kind="item.create",
            who=agent,
            which=(item_id, version),
            what="Create",
            where=where,
            payload={"item": item_id, "description": description_id, "version": version, "properties": properties},
        )
        return self.items[item_id]

    def migrate_item(self, item_id: str, target_version: int, agent: str, where: str | None = None) -> Item:
        """Re-pin an item to another version of its description, up or down."""
        item = self.item(item_id)
        target = self.resolve_description(item.description_id, target_version)
        check_properties(item.properties, target.property_schema, "item properties")
        for path in _active_paths(item.workflow):
            if _find_activity(target.workflow_def, path) is None:
                raise ActiveConflict(f"activity {path!r} is Active but absent from version {target_version}")
        previous = item.description_version
        self.commit(
            kind="item.migrate",
            who=agent,
            which=(item_id, target_version),
            what="Migrate",
            where=where,
            how={"from": previous, "to": target_version},
            payload={"item": item_id, "from": previous, "to": target_version},
        )
        return item

    def fire_transition(
        self,
        item_id: str,
        activity: str,
        transition: str,
        agent: str,
        where: str | None = None,
        outcome_fields: dict | None = None,
    ) -> tuple[Item, EventRecord]:
        item = self.item(item_id)
        version = self._description(item.description_id).version(item.description_version)
        # rehearse on a copy: the real instance mutates when the record lands
        probe = wf.WorkflowInstance.from_payload(item.workflow.to_payload())
        result = wf.apply_transition(
            version.workflow_def,
            probe,
            activity,
            transition,
            outcome_fields=outcome_fields,
            outcome_schemas=version.outcome_schemas,
        )
        payload = {"item": item_id, "activity": activity, "transition": transition}
        if result.outcome_fields is not None:
            payload["outcome"] = result.outcome_fields
        record = self.commit(
            kind="item.transition",
            who=agent,
            which=(item_id, item.description_version),
            what=result.what,
            where=where,
            payload=payload,
        )
        return item, record

    def item_history(self, item_id: str) -> list[EventRecord]:
        if item_id not in self.items and item_id not in self.descriptions:
            raise UnknownItem(f"no item {item_id!r}")
        return [r for r in self.log.records if r.which_item == item_id]

    def item(self, item_id: str) -> Item:
        item = self.items.get(item_id)
        if item is None:
            raise UnknownItem(f"no item {item_id!r}")
        return item

    # -- snapshot ----------------------------------------------------------

    def snapshot(self) -> str:
        """Canonical text of the full state; equal states give equal bytes."""
        state = {
            "last_seq": self.log.last_seq,
            "descriptions": {k: v.to_payload() for k, v in self.descriptions.items()},
            "items": {k: v.to_payload() for k, v in self.items.items()},
            "outcomes": {
                item: {path: o.to_payload() for path, o in per_item.items()}
                for item, per_item in self.outcomes.items()
            },
            **self.analysis.snapshot_payload(),
        }
        return canonical.dumps(state)


def _isolated(payload: dict) -> dict:
    """Deep copy through the canonical format; rejects non-wire values early."""
    if not isinstance(payload, dict):
        raise SchemaViolation("version payload must be a map")
    try:
        return canonical.loads(canonical.dumps(payload))
    except (TypeError, ValueError) as exc:
        raise SchemaViolation(f"payload is not canonically serializable: {exc}") from exc


def _active_paths(inst: wf.WorkflowInstance, prefix: str = "") -> list[str]:
    paths = []
    for name, state in inst.states.items():
        if state == wf.ACTIVE:
            paths.append(prefix + name)
    for name, sub in inst.subflows.items():
        paths.extend(_active_paths(sub, prefix=prefix + name + "/"))
    return paths


def _find_activity(defn: wf.WorkflowDef, path: str) -> wf.ActivityDef | None:
    parts = path.split("/")
    current = defn
    for i, part in enumerate(parts):
        act = current.activity(part)
        if act is None:
            return None
        if i == len(parts) - 1:
            return act
        if act.kind != wf.COMPOSITE or act.sub_workflow is None:
            return None
        current = act.sub_workflow
    return None


def _migrate_instance(old: wf.WorkflowInstance, new_def: wf.WorkflowDef, def_ref: tuple[str, int]) -> wf.WorkflowInstance:
    """Name-matching migration: shared activities keep state, new ones wait."""
    fresh = wf.instantiate_workflow(new_def, def_ref)
    _copy_states(old, fresh)
    _recompute_tree(fresh)
    return fresh


def _copy_states(old: wf.WorkflowInstance, new: wf.WorkflowInstance) -> None:
    for name in new.states:
        if name in old.states:
            new.states[name] = old.states[name]
        if name in new.subflows and name in old.subflows:
            _copy_states(old.subflows[name], new.subflows[name])


def _recompute_tree(inst: wf.WorkflowInstance) -> None:
    for sub in inst.subflows.values():
        _recompute_tree(sub)
    inst.complete = all(state == wf.COMPLETED for state in inst.states.values())
