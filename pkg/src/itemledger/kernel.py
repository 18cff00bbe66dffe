"""Item and description domain types.

Descriptions are versioned bundles of property schema, workflow
definition and outcome schemas; Items are instances pinned to one
description version. Existing versions are never mutated: evolution only
appends, so Items created from different versions coexist in one store.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field

from . import workflow as wf
from .clock import parse_ts
from .errors import DuplicateName, SchemaViolation

PROPERTY_KINDS = ("text", "integer", "decimal", "boolean", "timestamp", "reference")


def new_uuid_text(value: int | None = None) -> str:
    """Canonical lowercase hyphenated 128-bit identifier."""
    if value is None:
        return str(uuid.uuid4())
    return str(uuid.UUID(int=value & ((1 << 128) - 1), version=4))


def check_item_id(text: str) -> str:
    try:
        parsed = uuid.UUID(text)
    except (ValueError, AttributeError, TypeError) as exc:
        raise SchemaViolation(f"not a valid item id: {text!r}") from exc
    if str(parsed) != text:
        raise SchemaViolation(f"item id not in canonical form: {text!r}")
    return text


def check_value_kind(value, kind: str, what: str) -> None:
    """Type-check one property/outcome value against its declared kind."""
    ok = False
    if kind == "text":
        ok = isinstance(value, str)
    elif kind == "integer":
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind == "decimal":
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind == "boolean":
        ok = isinstance(value, bool)
    elif kind == "timestamp":
        if isinstance(value, str):
            try:
                parse_ts(value)
                ok = True
            except ValueError:
                ok = False
    elif kind == "reference":
        if isinstance(value, str):
            try:
                check_item_id(value)
                ok = True
            except SchemaViolation:
                ok = False
    else:
        raise SchemaViolation(f"{what}: unknown kind {kind!r}")
    if not ok:
        raise SchemaViolation(f"{what}: value {value!r} is not a valid {kind}")


def check_property_schema(entries: list[dict]) -> list[dict]:
    """Normalize and validate a (name, kind, required) schema list."""
    seen: set[str] = set()
    normalized = []
    for entry in entries:
        name = entry.get("name")
        kind = entry.get("kind")
        required = bool(entry.get("required", False))
        if not name or not isinstance(name, str):
            raise SchemaViolation("property name must be non-empty text")
        if name in seen:
            raise DuplicateName(f"property {name!r} declared twice")
        seen.add(name)
        if kind not in PROPERTY_KINDS:
            raise SchemaViolation(f"property {name!r} has unknown kind {kind!r}")
        normalized.append({"name": name, "kind": kind, "required": required})
    return normalized


def check_properties(properties: dict, schema: list[dict], what: str) -> None:
    """Required fields present, declared fields kind-correct; extras allowed.

    Extras pass through untouched: the meta-schema approach tolerates
    structurally heterogeneous instances.
    """
    if not isinstance(properties, dict):
        raise SchemaViolation(f"{what}: properties must be a map")
    wf.check_fields(properties, schema, what)


@dataclass
class DescriptionVersion:
    number: int
    property_schema: list[dict]
    workflow_def: wf.WorkflowDef
    outcome_schemas: dict[str, list[dict]]
    created_by: str
    created_at: str

    def to_payload(self) -> dict:
        return {
            "number": self.number,
            "property_schema": self.property_schema,
            "workflow": self.workflow_def.to_payload(),
            "outcome_schemas": self.outcome_schemas,
            "created_by": self.created_by,
            "created_at": self.created_at,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "DescriptionVersion":
        return cls(
            number=payload["number"],
            property_schema=[dict(e) for e in payload["property_schema"]],
            workflow_def=wf.WorkflowDef.from_payload(payload["workflow"]),
            outcome_schemas={k: [dict(e) for e in v] for k, v in payload["outcome_schemas"].items()},
            created_by=payload["created_by"],
            created_at=payload["created_at"],
        )


def check_version_payload(payload: dict) -> None:
    """Validate and normalize the user-supplied content of a description version.

    The workflow must pass graph validation and every outcome-bearing
    activity path needs an outcome schema entry.
    """
    from .errors import InvalidGraph

    schema = payload.get("property_schema", [])
    if not isinstance(schema, list):
        raise SchemaViolation("property_schema must be a list of field entries")
    payload["property_schema"] = check_property_schema(schema)
    try:
        defn = wf.WorkflowDef.from_payload(payload["workflow"])
    except (KeyError, TypeError, IndexError) as exc:
        raise SchemaViolation(f"malformed workflow definition: {exc}") from exc
    violations = wf.validate_graph(defn)
    if violations:
        raise InvalidGraph(violations)
    outcome_schemas = payload.get("outcome_schemas", {})
    if not isinstance(outcome_schemas, dict):
        raise SchemaViolation("outcome_schemas must be a map of activity path to field list")
    for path, entries in outcome_schemas.items():
        outcome_schemas[path] = check_property_schema(entries)
    bearing = {path for path, act in _walk_activities(defn) if act.has_outcome}
    missing = bearing - set(outcome_schemas)
    if missing:
        raise SchemaViolation(f"no outcome schema for activities: {sorted(missing)}")
    payload["outcome_schemas"] = outcome_schemas


def _walk_activities(defn: wf.WorkflowDef, prefix: str = ""):
    for act in defn.activities:
        path = prefix + act.name
        yield path, act
        if act.kind == wf.COMPOSITE and act.sub_workflow is not None:
            yield from _walk_activities(act.sub_workflow, prefix=path + "/")


@dataclass
class ItemDescription:
    id: str
    name: str
    versions: list[DescriptionVersion] = field(default_factory=list)

    def version(self, number: int) -> DescriptionVersion | None:
        if 1 <= number <= len(self.versions):
            return self.versions[number - 1]
        return None

    def to_payload(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "versions": [v.to_payload() for v in self.versions],
        }


@dataclass
class Item:
    id: str
    description_id: str
    description_version: int
    properties: dict
    workflow: wf.WorkflowInstance
    event_seq: int = 0

    def to_payload(self) -> dict:
        return {
            "id": self.id,
            "description": self.description_id,
            "version": self.description_version,
            "properties": self.properties,
            "workflow": self.workflow.to_payload(),
            "event_seq": self.event_seq,
        }


@dataclass
class Outcome:
    item: str
    activity: str
    fields: dict
    event_seq: int

    def to_payload(self) -> dict:
        return {
            "item": self.item,
            "activity": self.activity,
            "fields": self.fields,
            "event_seq": self.event_seq,
        }


# Built-in descriptions backing the analysis layer's kernel items. They are
# code-defined constants rather than log records so that a fresh store holds
# zero events and every domain operation appends exactly one.
_BUILTIN_NS = uuid.UUID("6ba7b811-9dad-11d1-80b4-00c04fd430c8")


def _builtin_description(kind: str, activity: str) -> ItemDescription:
    defn = wf.WorkflowDef(
        activities=[wf.ActivityDef(name=activity)],
        edges=[],
        start=activity,
    )
    version = DescriptionVersion(
        number=1,
        property_schema=[],
        workflow_def=defn,
        outcome_schemas={},
        created_by="system",
        created_at="1970-01-01T00:00:00.000Z",
    )
    return ItemDescription(
        id=str(uuid.uuid5(_BUILTIN_NS, f"itemledger:description:{kind}")),
        name=kind,
        versions=[version],
    )


BUILTIN_DESCRIPTIONS = {
    d.id: d
    for d in (
        _builtin_description("Dataset", "Curate"),
        _builtin_description("Pipeline", "Maintain"),
        _builtin_description("Analysis", "Conduct"),
    )
}

BUILTIN_BY_NAME = {d.name: d for d in BUILTIN_DESCRIPTIONS.values()}
