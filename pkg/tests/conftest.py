"""Shared fixtures: deterministic ledgers, workflow builders, and the
random-operation script engine used by the replay and completeness suites."""

from __future__ import annotations

import random

import pytest

from itemledger import BrokerConfig, Ledger, SimBroker, TickingClock
from itemledger import workflow as wf
from itemledger.errors import LedgerError


def make_ledger(seed: int = 1, path=None) -> Ledger:
    if path is not None:
        return Ledger.open(path, clock=TickingClock(), id_seed=seed)
    return Ledger(clock=TickingClock(), id_seed=seed)


@pytest.fixture
def ledger() -> Ledger:
    return make_ledger()


def activity(name: str, **kw) -> dict:
    return {"name": name, **kw}


def workflow_payload(activities: list[dict], edges: list[list[str]], start: str) -> dict:
    return {"activities": activities, "edges": edges, "start": start}


def linear_workflow(*names: str) -> dict:
    return workflow_payload(
        [activity(n) for n in names],
        [[a, b] for a, b in zip(names, names[1:])],
        names[0],
    )


def diamond_workflow() -> dict:
    return workflow_payload(
        [activity(n) for n in "ABCD"],
        [["A", "B"], ["A", "C"], ["B", "D"], ["C", "D"]],
        "A",
    )


def version_payload(schema=None, workflow=None, outcome_schemas=None) -> dict:
    return {
        "property_schema": schema or [],
        "workflow": workflow or linear_workflow("Only"),
        "outcome_schemas": outcome_schemas or {},
    }


def field_entry(name: str, kind: str = "text", required: bool = False) -> dict:
    return {"name": name, "kind": kind, "required": required}


VALUE_FOR_KIND = {
    "text": "sample",
    "integer": 7,
    "decimal": 1.25,
    "boolean": True,
    "timestamp": "2020-06-01T12:00:00.000Z",
    "reference": "00000000-0000-4000-8000-000000000001",
}


def properties_for(schema: list[dict]) -> dict:
    return {entry["name"]: VALUE_FOR_KIND[entry["kind"]] for entry in schema if entry["required"]}


def outcome_for(version, path: str) -> dict | None:
    schema = version.outcome_schemas.get(path)
    if schema is None:
        return None
    return {entry["name"]: VALUE_FOR_KIND[entry["kind"]] for entry in schema}


def drive_to_completion(ledger: Ledger, item_id: str, agent: str = "driver") -> int:
    """Start+Complete enabled activities until the item's workflow finishes.

    Returns the number of transitions fired.
    """
    fired = 0
    while True:
        item = ledger.item(item_id)
        version = ledger.resolve_description(item.description_id, item.description_version)
        enabled = wf.enabled_activities(version.workflow_def, item.workflow)
        if not enabled:
            break
        path = enabled[0]
        ledger.fire_transition(item_id, path, "Start", agent)
        ledger.fire_transition(item_id, path, "Complete", agent, outcome_fields=outcome_for(version, path))
        fired += 2
    return fired


def sample_dataset_elements(n: int) -> list[dict]:
    return [
        {"files": [[f"/data/subject{i:02d}/scan.nii", f"hash{i:04d}"]], "metadata": {"subject": f"s{i:02d}"}}
        for i in range(n)
    ]


def build_study(ledger: Ledger, agent: str = "alice", n_elements: int = 6, stages=("Align", "Segment", "Score")):
    """Dataset + linear pipeline fixture used across suites."""
    dataset = ledger.analysis.register_dataset(
        {"study": "adni-vs-controls", "modality": "MRI", "subject_count": n_elements * 2},
        sample_dataset_elements(n_elements),
        agent,
    )
    pipeline = ledger.analysis.register_pipeline(
        "/pipelines/cortical-thickness.sh",
        {"threads": "2"},
        ["/common/atlases"],
        linear_workflow(*stages),
        agent,
    )
    return dataset, pipeline


def default_broker(ledger: Ledger, seed: int = 42, failure_rate: float = 0.0) -> SimBroker:
    return SimBroker(BrokerConfig(seed=seed, failure_rate=failure_rate), clock=ledger.clock)


# -- random operation scripts -------------------------------------------------


def random_workflow(rng: random.Random, max_nodes: int = 4, with_outcomes: bool = False):
    """Random valid DAG: edges only go forward, node 0 is the start, every
    later node gets at least one incoming edge."""
    n = rng.randint(1, max_nodes)
    names = [f"step{i}" for i in range(n)]
    edges = []
    for j in range(1, n):
        edges.append([names[rng.randrange(j)], names[j]])
        for i in range(j):
            if rng.random() < 0.2 and [names[i], names[j]] not in edges:
                edges.append([names[i], names[j]])
    activities = []
    outcome_schemas = {}
    for name in names:
        has_outcome = with_outcomes and rng.random() < 0.3
        activities.append(activity(name, has_outcome=has_outcome))
        if has_outcome:
            outcome_schemas[name] = [field_entry("value", "decimal", required=True)]
    return workflow_payload(activities, edges, names[0]), outcome_schemas


def random_schema(rng: random.Random) -> list[dict]:
    kinds = ["text", "integer", "decimal", "boolean"]
    return [
        field_entry(f"prop{i}", rng.choice(kinds), required=rng.random() < 0.5)
        for i in range(rng.randint(0, 3))
    ]


def random_version_payload(rng: random.Random) -> dict:
    flow, outcome_schemas = random_workflow(rng, with_outcomes=True)
    return {
        "property_schema": random_schema(rng),
        "workflow": flow,
        "outcome_schemas": outcome_schemas,
    }


class ScriptRunner:
    """Applies random operations to a ledger and tracks the event yield each
    accepted operation is contracted to produce."""

    def __init__(self, rng: random.Random, ledger: Ledger):
        self.rng = rng
        self.ledger = ledger
        self.expected = 0
        self.agents = ["alice", "bob", "carol"]
        self.descriptions: list[str] = []
        self.items: list[str] = []
        self.datasets: list = []
        self.pipelines: list = []
        self.analyses: list = []

    def _agent(self) -> str:
        return self.rng.choice(self.agents)

    def _attempt(self, yields: int, fn, *args, **kwargs) -> bool:
        try:
            fn(*args, **kwargs)
        except LedgerError:
            return False
        self.expected += yields
        return True

    def step(self) -> None:
        ops = [
            self.op_register_description,
            self.op_add_version,
            self.op_instantiate,
            self.op_transition,
            self.op_migrate,
            self.op_register_dataset,
            self.op_register_pipeline,
            self.op_define_analysis,
            self.op_select_and_run,
            self.op_annotate_or_share,
            self.op_bogus,
        ]
        self.rng.choice(ops)()

    def run(self, steps: int) -> int:
        for _ in range(steps):
            self.step()
        return self.expected

    def op_register_description(self) -> None:
        payload = random_version_payload(self.rng)
        try:
            description_id, _ = self.ledger.register_description(
                f"Kind{len(self.descriptions)}", payload, self._agent()
            )
        except LedgerError:
            return
        self.expected += 1
        self.descriptions.append(description_id)

    def op_add_version(self) -> None:
        if not self.descriptions:
            return
        description_id = self.rng.choice(self.descriptions)
        self._attempt(
            1, self.ledger.add_description_version, description_id, random_version_payload(self.rng), self._agent()
        )

    def op_instantiate(self) -> None:
        if not self.descriptions:
            return
        description_id = self.rng.choice(self.descriptions)
        description = self.ledger.descriptions[description_id]
        version = self.rng.randint(1, len(description.versions))
        schema = description.versions[version - 1].property_schema
        if self.rng.random() < 0.25:
            properties = {}  # may violate required fields; rejection is fine
        else:
            properties = properties_for(schema)
        try:
            item = self.ledger.instantiate_item(description_id, version, properties, self._agent())
        except LedgerError:
            return
        self.expected += 1
        self.items.append(item.id)

    def op_transition(self) -> None:
        if not self.items:
            return
        item_id = self.rng.choice(self.items)
        item = self.ledger.item(item_id)
        version = self.ledger.resolve_description(item.description_id, item.description_version)
        enabled = wf.enabled_activities(version.workflow_def, item.workflow)
        active = [p for p, s in item.workflow.states.items() if s == wf.ACTIVE]
        if self.rng.random() < 0.2:
            # deliberately illegal: Complete something Waiting
            waiting = [p for p, s in item.workflow.states.items() if s == wf.WAITING]
            if waiting:
                self._attempt(1, self.ledger.fire_transition, item_id, waiting[0], "Complete", self._agent())
                return
        if enabled and (not active or self.rng.random() < 0.5):
            self._attempt(1, self.ledger.fire_transition, item_id, enabled[0], "Start", self._agent())
        elif active:
            path = active[0]
            self._attempt(
                1,
                self.ledger.fire_transition,
                item_id,
                path,
                "Complete",
                self._agent(),
                outcome_fields=outcome_for(version, path),
            )

    def op_migrate(self) -> None:
        if not self.items:
            return
        item_id = self.rng.choice(self.items)
        item = self.ledger.item(item_id)
        versions = len(self.ledger.descriptions[item.description_id].versions)
        self._attempt(1, self.ledger.migrate_item, item_id, self.rng.randint(1, versions), self._agent())

    def op_register_dataset(self) -> None:
        elements = sample_dataset_elements(self.rng.randint(1, 4))
        try:
            dataset = self.ledger.analysis.register_dataset(
                {"cohort": self.rng.choice(["a", "b"]), "subject_count": self.rng.randint(1, 40)},
                elements,
                self._agent(),
            )
        except LedgerError:
            return
        self.expected += 1
        self.datasets.append(dataset)

    def op_register_pipeline(self) -> None:
        stages = linear_workflow(*[f"stage{i}" for i in range(self.rng.randint(1, 3))])
        try:
            pipeline = self.ledger.analysis.register_pipeline(
                "/scripts/run.sh", {"mem": "1G"}, [], stages, self._agent()
            )
        except LedgerError:
            return
        self.expected += 1
        self.pipelines.append(pipeline)

    def op_define_analysis(self) -> None:
        analysis = self.ledger.analysis.define_analysis(self._agent())
        self.expected += 1
        self.analyses.append(analysis)

    def op_select_and_run(self) -> None:
        if not (self.analyses and self.datasets and self.pipelines):
            return
        analysis = self.rng.choice(self.analyses)
        owner = analysis.owner
        dataset = self.rng.choice(self.datasets)
        pipeline = self.rng.choice(self.pipelines)
        selection = [e.id for e in dataset.elements[: self.rng.randint(1, len(dataset.elements))]]
        if not self._attempt(
            1, self.ledger.analysis.set_working_dataset, analysis.item_id, dataset.item_id, selection, owner
        ):
            return
        if not self._attempt(
            1, self.ledger.analysis.set_working_pipeline, analysis.item_id, pipeline.item_id, {}, owner
        ):
            return
        if self.rng.random() < 0.7:
            # failure-free run yields 1 Run event + one job event per
            # (element, stage) pair
            broker = SimBroker(
                BrokerConfig(seed=self.rng.randrange(2**32), failure_rate=0.0), clock=self.ledger.clock
            )
            yields = 1 + len(selection) * len(pipeline.stages.activities)
            if self._attempt(yields, self.ledger.analysis.run_analysis, analysis.item_id, owner, broker):
                self._attempt(1, self.ledger.analysis.consolidate, analysis.item_id, owner)

    def op_annotate_or_share(self) -> None:
        if not self.analyses:
            return
        analysis = self.rng.choice(self.analyses)
        if self.rng.random() < 0.5:
            self._attempt(1, self.ledger.analysis.annotate, analysis.item_id, "checked", self._agent())
        else:
            self._attempt(1, self.ledger.analysis.share_analysis, analysis.item_id, self._agent(), analysis.owner)

    def op_bogus(self) -> None:
        # operations against ids that do not exist must be rejected eventless
        bogus = "99999999-9999-4999-8999-999999999999"
        choice = self.rng.randrange(3)
        if choice == 0:
            self._attempt(1, self.ledger.add_description_version, bogus, random_version_payload(self.rng), "mallory")
        elif choice == 1:
            self._attempt(1, self.ledger.migrate_item, bogus, 1, "mallory")
        else:
            self._attempt(1, self.ledger.analysis.annotate, bogus, "ghost", "mallory")


def run_random_script(seed: int, steps: int = 12) -> tuple[Ledger, int]:
    rng = random.Random(seed)
    ledger = make_ledger(seed=seed)
    runner = ScriptRunner(rng, ledger)
    expected = runner.run(steps)
    return ledger, expected
