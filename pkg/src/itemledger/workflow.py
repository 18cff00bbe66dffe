"""Activity graphs and the lifecycle state machine.

A workflow definition is a directed acyclic graph of atomic or composite
activities with a single start node. Instances track one state per
activity (Waiting, Active, Completed, Failed) and enforce the legal
transitions Start, Complete, Fail and Retry. Composite activities carry
a sub-workflow that must itself be complete before the composite one
can complete.

This module is pure state transformation: it never assigns sequence
numbers or appends events. The ledger wraps these functions and records
one event per accepted transition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    IllegalTransition,
    InvalidGraph,
    NotEnabled,
    SchemaViolation,
    UnknownActivity,
)

WAITING = "Waiting"
ACTIVE = "Active"
COMPLETED = "Completed"
FAILED = "Failed"

STATES = (WAITING, ACTIVE, COMPLETED, FAILED)
TRANSITIONS = ("Start", "Complete", "Fail", "Retry")

# transition -> (state it leaves, state it enters)
_TRANSITION_TABLE = {
    "Start": (WAITING, ACTIVE),
    "Complete": (ACTIVE, COMPLETED),
    "Fail": (ACTIVE, FAILED),
    "Retry": (FAILED, WAITING),
}

ATOMIC = "atomic"
COMPOSITE = "composite"


@dataclass
class ActivityDef:
    name: str
    kind: str = ATOMIC
    sub_workflow: "WorkflowDef | None" = None
    has_outcome: bool = False
    params: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        payload = {
            "name": self.name,
            "kind": self.kind,
            "has_outcome": self.has_outcome,
            "params": dict(self.params),
        }
        if self.sub_workflow is not None:
            payload["sub_workflow"] = self.sub_workflow.to_payload()
        return payload

    @classmethod
    def from_payload(cls, payload: dict) -> "ActivityDef":
        sub = payload.get("sub_workflow")
        return cls(
            name=payload["name"],
            kind=payload.get("kind", ATOMIC),
            sub_workflow=WorkflowDef.from_payload(sub) if sub else None,
            has_outcome=payload.get("has_outcome", False),
            params=dict(payload.get("params", {})),
        )


@dataclass
class WorkflowDef:
    activities: list[ActivityDef]
    edges: list[tuple[str, str]]
    start: str

    def activity(self, name: str) -> ActivityDef | None:
        for act in self.activities:
            if act.name == name:
                return act
        return None

    def predecessors(self, name: str) -> list[str]:
        return [a for a, b in self.edges if b == name]

    def to_payload(self) -> dict:
        return {
            "activities": [a.to_payload() for a in self.activities],
            "edges": [[a, b] for a, b in self.edges],
            "start": self.start,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "WorkflowDef":
        return cls(
            activities=[ActivityDef.from_payload(a) for a in payload["activities"]],
            edges=[(e[0], e[1]) for e in payload["edges"]],
            start=payload["start"],
        )


@dataclass
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}({self.subject}): {self.message}"


def validate_graph(defn: WorkflowDef, prefix: str = "") -> list[Violation]:
    """Return every invariant violation; an empty list means the graph is valid.

    Checks, in order: non-empty activity names, name uniqueness, a known
    start activity, edge endpoints, no incoming edges on start, acyclicity,
    at least one terminal, reachability from start, co-reachability to a
    terminal, and recursively the sub-workflows of composite activities.
    """
    violations: list[Violation] = []
    names = [a.name for a in defn.activities]

    if not defn.activities:
        violations.append(Violation("empty", prefix or "<graph>", "no activities"))
        return violations

    seen: set[str] = set()
    for act in defn.activities:
        if not act.name:
            violations.append(Violation("empty-name", prefix + "<activity>", "activity name empty"))
        elif act.name in seen:
            violations.append(Violation("duplicate-name", prefix + act.name, "activity name repeated"))
        seen.add(act.name)
        if "/" in act.name:
            violations.append(Violation("bad-name", prefix + act.name, "activity name may not contain '/'"))

    name_set = set(names)
    if defn.start not in name_set:
        violations.append(Violation("unknown-start", prefix + str(defn.start), "start is not an activity"))

    for a, b in defn.edges:
        if a not in name_set or b not in name_set:
            violations.append(Violation("unknown-edge", f"{prefix}{a}->{b}", "edge endpoint is not an activity"))
    edges = [(a, b) for a, b in defn.edges if a in name_set and b in name_set]

    if any(b == defn.start for _, b in edges):
        violations.append(Violation("start-incoming", prefix + defn.start, "start has incoming edges"))

    # Kahn's algorithm: leftovers sit on a cycle.
    indeg = {n: 0 for n in name_set}
    for _, b in edges:
        indeg[b] += 1
    queue = sorted(n for n, d in indeg.items() if d == 0)
    order = []
    while queue:
        n = queue.pop(0)
        order.append(n)
        for a, b in edges:
            if a == n:
                indeg[b] -= 1
                if indeg[b] == 0:
                    queue.append(b)
        queue.sort()
    cyclic = name_set - set(order)
    for n in sorted(cyclic):
        violations.append(Violation("cycle", prefix + n, "activity is on a cycle"))

    sources = {a for a, _ in edges}
    terminals = sorted(n for n in name_set if n not in sources)
    if not terminals:
        violations.append(Violation("no-terminal", prefix or "<graph>", "no terminal activity"))

    if defn.start in name_set and not cyclic:
        reachable = {defn.start}
        frontier = [defn.start]
        while frontier:
            n = frontier.pop()
            for a, b in edges:
                if a == n and b not in reachable:
                    reachable.add(b)
                    frontier.append(b)
        for n in sorted(name_set - reachable):
            violations.append(Violation("unreachable", prefix + n, "not reachable from start"))

        coreach = set(terminals)
        changed = True
        while changed:
            changed = False
            for a, b in edges:
                if b in coreach and a not in coreach:
                    coreach.add(a)
                    changed = True
        for n in sorted(name_set - coreach):
            violations.append(Violation("no-path-to-terminal", prefix + n, "cannot reach a terminal"))

    for act in defn.activities:
        if act.kind == COMPOSITE:
            if act.sub_workflow is None:
                violations.append(Violation("missing-subworkflow", prefix + act.name, "composite without sub-workflow"))
            else:
                violations.extend(validate_graph(act.sub_workflow, prefix=f"{prefix}{act.name}/"))
        elif act.sub_workflow is not None:
            violations.append(Violation("unexpected-subworkflow", prefix + act.name, "atomic activity carries a sub-workflow"))

    return violations


def activity_paths(defn: WorkflowDef, prefix: str = "") -> list[str]:
    """All activity paths in definition order, composites before their children."""
    paths = []
    for act in defn.activities:
        path = prefix + act.name
        paths.append(path)
        if act.kind == COMPOSITE and act.sub_workflow is not None:
            paths.extend(activity_paths(act.sub_workflow, prefix=path + "/"))
    return paths


@dataclass
class WorkflowInstance:
    def_ref: tuple[str, int]
    states: dict[str, str]
    complete: bool = False
    subflows: dict[str, "WorkflowInstance"] = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "def_ref": {"id": self.def_ref[0], "version": self.def_ref[1]},
            "states": dict(self.states),
            "complete": self.complete,
            "subflows": {k: v.to_payload() for k, v in sorted(self.subflows.items())},
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "WorkflowInstance":
        ref = payload["def_ref"]
        return cls(
            def_ref=(ref["id"], ref["version"]),
            states=dict(payload["states"]),
            complete=payload["complete"],
            subflows={k: cls.from_payload(v) for k, v in payload.get("subflows", {}).items()},
        )


def instantiate_workflow(defn: WorkflowDef, def_ref: tuple[str, int]) -> WorkflowInstance:
    """Fresh instance: every activity Waiting, nothing complete."""
    violations = validate_graph(defn)
    if violations:
        raise InvalidGraph(violations)
    return _instantiate_unchecked(defn, def_ref)


def _instantiate_unchecked(defn: WorkflowDef, def_ref: tuple[str, int]) -> WorkflowInstance:
    inst = WorkflowInstance(def_ref=def_ref, states={a.name: WAITING for a in defn.activities})
    for act in defn.activities:
        if act.kind == COMPOSITE and act.sub_workflow is not None:
            inst.subflows[act.name] = _instantiate_unchecked(act.sub_workflow, def_ref)
    return inst


def enabled_activities(defn: WorkflowDef, inst: WorkflowInstance, prefix: str = "") -> list[str]:
    """Activity paths that may Start now, in definition order.

    An activity is enabled iff it is Waiting and every predecessor is
    Completed (AND-join). Children of an Active composite are reported by
    path; children of inactive composites are not startable.
    """
    enabled = []
    for act in defn.activities:
        state = inst.states[act.name]
        path = prefix + act.name
        if state == WAITING and all(inst.states[p] == COMPLETED for p in defn.predecessors(act.name)):
            enabled.append(path)
        if state == ACTIVE and act.kind == COMPOSITE and act.sub_workflow is not None:
            enabled.extend(enabled_activities(act.sub_workflow, inst.subflows[act.name], prefix=path + "/"))
    return enabled


def _resolve(defn: WorkflowDef, inst: WorkflowInstance, path: str):
    """Walk a slash path down composite activities.

    Returns (owning def, owning instance, activity def, local name).
    """
    parts = path.split("/")
    cur_def, cur_inst = defn, inst
    for i, part in enumerate(parts):
        act = cur_def.activity(part)
        if act is None:
            raise UnknownActivity(f"no activity at path {path!r}")
        if i == len(parts) - 1:
            return cur_def, cur_inst, act, part
        if act.kind != COMPOSITE or act.sub_workflow is None:
            raise UnknownActivity(f"{'/'.join(parts[: i + 1])!r} is not composite; cannot descend to {path!r}")
        cur_def, cur_inst = act.sub_workflow, cur_inst.subflows[part]
    raise UnknownActivity(f"no activity at path {path!r}")  # pragma: no cover


def _recompute_complete(defn: WorkflowDef, inst: WorkflowInstance) -> None:
    inst.complete = all(state == COMPLETED for state in inst.states.values())


def check_fields(fields_payload: dict, schema: list[dict], what: str) -> None:
    """Validate a field map against a (name, kind, required) schema.

    Declared fields are kind-checked, required ones must be present,
    undeclared extras pass through untouched.
    """
    from .kernel import check_value_kind  # local import avoids a module cycle

    for entry in schema:
        name, kind, required = entry["name"], entry["kind"], entry["required"]
        if name not in fields_payload:
            if required:
                raise SchemaViolation(f"{what}: missing required field {name!r}")
            continue
        check_value_kind(fields_payload[name], kind, f"{what}: field {name!r}")


@dataclass
class TransitionResult:
    what: str
    outcome_fields: dict | None


def apply_transition(
    defn: WorkflowDef,
    inst: WorkflowInstance,
    path: str,
    transition: str,
    outcome_fields: dict | None = None,
    outcome_schemas: dict[str, list[dict]] | None = None,
) -> TransitionResult:
    """Fire one transition on the activity at `path`, mutating the instance.

    Start is only legal on enabled activities. Complete on an
    outcome-bearing activity validates `outcome_fields` against the
    activity's outcome schema and reports the stored fields back; Complete
    on a composite requires its sub-workflow to be complete first.
    """
    if transition not in _TRANSITION_TABLE:
        raise IllegalTransition(f"unknown transition {transition!r}")
    owner_def, owner_inst, act, local = _resolve(defn, inst, path)
    current = owner_inst.states[local]
    expected_from, target = _TRANSITION_TABLE[transition]
    if current != expected_from:
        raise IllegalTransition(f"{transition} is not legal from {current} (activity {path!r})")

    if transition == "Start":
        preds = owner_def.predecessors(local)
        if any(owner_inst.states[p] != COMPLETED for p in preds):
            raise NotEnabled(f"activity {path!r} has incomplete predecessors")

    stored: dict | None = None
    if transition == "Complete":
        if act.kind == COMPOSITE:
            sub = owner_inst.subflows.get(local)
            if sub is None or not sub.complete:
                raise IllegalTransition(f"composite {path!r} cannot complete before its sub-workflow")
        if act.has_outcome:
            schema = (outcome_schemas or {}).get(path)
            if schema is None:
                raise SchemaViolation(f"no outcome schema for activity {path!r}")
            stored = dict(outcome_fields or {})
            check_fields(stored, schema, f"outcome of {path!r}")

    owner_inst.states[local] = target
    # complete is a function of the owning instance's own states only; a
    # parent composite flips to Completed through its own transition.
    _recompute_complete(owner_def, owner_inst)
    return TransitionResult(what=f"{path}/{transition}", outcome_fields=stored)
