"""Querying service and exporters.

Conjunctive predicate queries over items and events, tabular results
exported as CSV or XML, and a PROV document builder tying an analysis,
its data, its jobs and its agents together through used /
wasGeneratedBy / wasAssociatedWith / wasDerivedFrom relations.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from . import canonical
from .clock import parse_ts
from .errors import NotVisible, TypeMismatch, UnknownAnalysis, UnknownField, UnknownKind
from .ledger import Ledger

OPS = ("eq", "neq", "lt", "lte", "gt", "gte", "contains")
ORDERING_OPS = ("lt", "lte", "gt", "gte")

ITEM_KINDS = ("item", "description", "dataset", "pipeline", "analysis")

_MISSING = object()


@dataclass
class Predicate:
    field: str
    op: str
    value: object

    @classmethod
    def parse(cls, text: str) -> "Predicate":
        """Parse `field:op:value`; the value is typed by literal shape."""
        parts = text.split(":", 2)
        if len(parts) != 3:
            raise TypeMismatch(f"predicate must be field:op:value, got {text!r}")
        return cls(parts[0], parts[1], _parse_literal(parts[2]))


def _parse_literal(text: str):
    if len(text) >= 2 and text.startswith('"') and text.endswith('"'):
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _is_timestamp(value) -> bool:
    if not isinstance(value, str) or "T" not in value:
        return False
    try:
        parse_ts(value)
        return True
    except ValueError:
        return False


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def check_predicate(predicate: Predicate) -> None:
    if predicate.op not in OPS:
        raise TypeMismatch(f"unknown operator {predicate.op!r}")
    if predicate.op in ORDERING_OPS and not (_is_number(predicate.value) or _is_timestamp(predicate.value)):
        raise TypeMismatch(f"{predicate.op} needs an integer, decimal or timestamp literal")
    if predicate.op == "contains" and not isinstance(predicate.value, str):
        raise TypeMismatch("contains needs a text literal")


def matches(stored, predicate: Predicate) -> bool:
    """One typed comparison; missing fields never match, bad types raise."""
    if stored is _MISSING:
        return False
    op, literal = predicate.op, predicate.value
    if op == "contains":
        if not isinstance(stored, str):
            raise TypeMismatch(f"contains needs text, field {predicate.field!r} holds {stored!r}")
        return literal in stored
    if op in ORDERING_OPS:
        if _is_number(literal) and _is_number(stored):
            pass
        elif _is_timestamp(literal) and _is_timestamp(stored):
            pass  # canonical ISO-8601 UTC text orders chronologically
        else:
            raise TypeMismatch(f"cannot order field {predicate.field!r} value {stored!r} against {literal!r}")
        return {
            "lt": stored < literal,
            "lte": stored <= literal,
            "gt": stored > literal,
            "gte": stored >= literal,
        }[op]
    # eq / neq
    compatible = (
        (_is_number(stored) and _is_number(literal))
        or (isinstance(stored, bool) and isinstance(literal, bool))
        or (isinstance(stored, str) and isinstance(literal, str))
    )
    if not compatible:
        raise TypeMismatch(f"field {predicate.field!r} holds {stored!r}, cannot compare with {literal!r}")
    return (stored == literal) if op == "eq" else (stored != literal)


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list[str]] = field(default_factory=list)

    def to_payload(self) -> dict:
        return {"columns": self.columns, "rows": self.rows}


def render_cell(value) -> str:
    if value is _MISSING or value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    return canonical.dumps(value)


def _item_rows(ledger: Ledger, kind: str, agent: str | None) -> tuple[list[str], list[dict]]:
    base = ledger.analysis
    if kind == "item":
        rows = [
            {"id": i.id, "description": i.description_id, "version": i.description_version, **i.properties}
            for i in ledger.items.values()
        ]
        fixed = ["id", "description", "version"]
    elif kind == "description":
        rows = [{"id": d.id, "name": d.name, "versions": len(d.versions)} for d in ledger.descriptions.values()]
        fixed = ["id", "name", "versions"]
    elif kind == "dataset":
        rows = [
            {"id": d.item_id, "element_count": len(d.elements), **d.study_metadata}
            for d in base.datasets.values()
        ]
        fixed = ["id", "element_count"]
    elif kind == "pipeline":
        rows = [
            {"id": p.item_id, "script_location": p.script_location, **p.env_settings}
            for p in base.pipelines.values()
        ]
        fixed = ["id", "script_location"]
    elif kind == "analysis":
        rows = [
            {
                "id": a.item_id,
                "owner": a.owner,
                "phase": a.phase,
                "dataset": a.working_dataset[0] if a.working_dataset else "",
                "pipeline": a.working_pipeline or "",
                "elements": len(a.elements),
            }
            for a in base.analyses.values()
            if agent is None or a.visible_to(agent)
        ]
        fixed = ["id", "owner", "phase", "dataset", "pipeline", "elements"]
    else:
        raise UnknownKind(f"unknown item kind {kind!r}")
    extras = sorted({key for row in rows for key in row} - set(fixed))
    return fixed + extras, rows


def query_items(ledger: Ledger, kind: str, predicates: list[Predicate], agent: str | None = None) -> ResultTable:
    """Items of one kind satisfying every predicate, in creation order."""
    columns, rows = _item_rows(ledger, kind, agent)
    return _filter(columns, rows, predicates)


def query_events(ledger: Ledger, predicates: list[Predicate]) -> ResultTable:
    """Events matching every predicate, ordered by seq."""
    columns = ["seq", "who", "which", "what", "when", "where", "why", "how"]
    rows = [
        {
            "seq": r.seq,
            "who": r.who,
            "which": f"{r.which_item}:{r.which_version}",
            "what": r.what,
            "when": r.when,
            "where": r.where,
            "why": r.why,
            "how": canonical.dumps(r.how),
        }
        for r in ledger.events
    ]
    return _filter(columns, rows, predicates)


def _filter(columns: list[str], rows: list[dict], predicates: list[Predicate]) -> ResultTable:
    # validation order: every literal well-typed, then every field resolvable
    known = set(columns)
    for predicate in predicates:
        check_predicate(predicate)
    for predicate in predicates:
        if predicate.field not in known:
            raise UnknownField(f"no queryable field {predicate.field!r}")
    kept = [
        row
        for row in rows
        if all(matches(row.get(p.field, _MISSING), p) for p in predicates)
    ]
    return ResultTable(columns=columns, rows=[[render_cell(row.get(c, _MISSING)) for c in columns] for row in kept])


# -- tabular exports --------------------------------------------------------


def _csv_field(value: str) -> str:
    if any(ch in value for ch in ',"\n'):
        return '"' + value.replace('"', '""') + '"'
    return value


def export_csv(table: ResultTable) -> str:
    lines = [",".join(_csv_field(c) for c in table.columns)]
    for row in table.rows:
        lines.append(",".join(_csv_field(cell) for cell in row))
    return "\n".join(lines) + "\n"


def export_xml(table: ResultTable) -> str:
    root = ET.Element("resultset")
    for row in table.rows:
        row_el = ET.SubElement(root, "row")
        for column, cell in zip(table.columns, row):
            ET.SubElement(row_el, column).text = cell
    body = ET.tostring(root, encoding="unicode")
    return '<?xml version="1.0" encoding="UTF-8"?>' + body


def export_table(table: ResultTable, format: str) -> str:
    fmt = format.lower()
    if fmt == "csv":
        return export_csv(table)
    if fmt == "xml":
        return export_xml(table)
    raise UnknownKind(f"unknown export format {format!r}")


# -- PROV export -------------------------------------------------------------


@dataclass
class ProvDocument:
    entities: list[dict] = field(default_factory=list)
    activities: list[dict] = field(default_factory=list)
    agents: list[dict] = field(default_factory=list)
    relations: list[dict] = field(default_factory=list)

    def to_payload(self) -> dict:
        return {
            "entities": self.entities,
            "activities": self.activities,
            "agents": self.agents,
            "relations": self.relations,
        }


def export_prov(ledger: Ledger, analysis_id: str, agent: str) -> ProvDocument:
    """PROV view of one analysis: its data, jobs, outputs and people."""
    analysis = ledger.analysis.analyses.get(analysis_id)
    if analysis is None:
        raise UnknownAnalysis(f"no analysis {analysis_id!r}")
    if not analysis.visible_to(agent):
        raise NotVisible(f"analysis {analysis_id!r} is not shared with {agent!r}")

    doc = ProvDocument()
    analysis_ref = f"analysis:{analysis.item_id}"
    doc.entities.append({"id": analysis_ref, "kind": "analysis"})
    if analysis.derived_from:
        source_ref = f"analysis:{analysis.derived_from}"
        doc.entities.append({"id": source_ref, "kind": "analysis"})
        doc.relations.append({"kind": "wasDerivedFrom", "from": analysis_ref, "to": source_ref})
    if analysis.working_dataset:
        dataset_id, selection = analysis.working_dataset
        doc.entities.append({"id": f"dataset:{dataset_id}", "kind": "dataset"})
        for element_id in selection:
            doc.entities.append({"id": f"data-element:{element_id}", "kind": "data-element"})
    if analysis.working_pipeline:
        doc.entities.append({"id": f"pipeline:{analysis.working_pipeline}", "kind": "pipeline"})

    owner_ref = f"agent:{analysis.owner}"
    names = [analysis.owner] + sorted({a["agent"] for a in analysis.annotations} - {analysis.owner})
    doc.agents = [{"id": f"agent:{name}"} for name in names]

    for element in analysis.elements:
        element_ref = f"data-element:{element.data_element}"
        for job_id in element.job_ids:
            job = analysis.jobs[job_id]
            job_ref = f"job:{job_id}"
            doc.activities.append(
                {"id": job_ref, "label": job["activity"], "start": job["started_at"], "end": job["finished_at"]}
            )
            doc.relations.append({"kind": "used", "from": job_ref, "to": element_ref})
            doc.relations.append({"kind": "wasAssociatedWith", "from": job_ref, "to": owner_ref})
            if job["success"]:
                outcome_ref = f"outcome:{job_id}"
                doc.entities.append({"id": outcome_ref, "kind": "outcome"})
                doc.relations.append({"kind": "wasGeneratedBy", "from": outcome_ref, "to": job_ref})
                doc.relations.append({"kind": "wasDerivedFrom", "from": outcome_ref, "to": element_ref})
    return doc
