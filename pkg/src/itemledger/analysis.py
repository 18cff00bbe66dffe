"""Datasets, pipelines and user-owned analyses.

An Analysis pairs a working dataset selection with a working pipeline
and moves through Investigation, Definition, Execution and
Consolidation. Running it fans out one AnalysisElement per selected
data element, submits one job per enabled pipeline stage to the broker,
and records one event per job result. Analyses are visible only to
their owner and anyone the owner shared them with.

All state here is rebuilt from the event log: operations validate, then
commit a record through the ledger, and `apply` folds records into
state both live and during replay.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from . import workflow as wf
from .broker import SimBroker
from .errors import (
    DuplicateElement,
    EmptySelection,
    IllegalTransition,
    IncompleteDefinition,
    InvalidGraph,
    NotOwner,
    NotTerminal,
    NotVisible,
    SchemaViolation,
    UnknownAnalysis,
    UnknownDataset,
    UnknownElement,
    UnknownPipeline,
)
from .kernel import BUILTIN_BY_NAME, check_item_id

if TYPE_CHECKING:
    from .ledger import Ledger

INVESTIGATION = "Investigation"
DEFINITION = "Definition"
EXECUTION = "Execution"
CONSOLIDATION = "Consolidation"

PENDING = "Pending"
RUNNING = "Running"
SUCCEEDED = "Succeeded"
FAILED = "Failed"


@dataclass
class DataElement:
    id: str
    files: list[list[str]]
    metadata: dict

    def to_payload(self) -> dict:
        return {"id": self.id, "files": self.files, "metadata": self.metadata}


@dataclass
class Dataset:
    item_id: str
    study_metadata: dict
    elements: list[DataElement]

    def element(self, element_id: str) -> DataElement | None:
        for el in self.elements:
            if el.id == element_id:
                return el
        return None

    def to_payload(self) -> dict:
        return {
            "item": self.item_id,
            "study_metadata": self.study_metadata,
            "elements": [e.to_payload() for e in self.elements],
        }


@dataclass
class Pipeline:
    item_id: str
    script_location: str
    env_settings: dict
    common_dirs: list[str]
    stages: wf.WorkflowDef

    def to_payload(self) -> dict:
        return {
            "item": self.item_id,
            "script_location": self.script_location,
            "env_settings": self.env_settings,
            "common_dirs": self.common_dirs,
            "stages": self.stages.to_payload(),
        }


@dataclass
class AnalysisElement:
    id: str
    analysis: str
    data_element: str
    workflow: wf.WorkflowInstance
    job_ids: list[int] = field(default_factory=list)
    result_state: str = PENDING

    def to_payload(self) -> dict:
        return {
            "id": self.id,
            "analysis": self.analysis,
            "data_element": self.data_element,
            "workflow": self.workflow.to_payload(),
            "job_ids": list(self.job_ids),
            "result_state": self.result_state,
        }


@dataclass
class Analysis:
    item_id: str
    owner: str
    phase: str = INVESTIGATION
    shared_with: set[str] = field(default_factory=set)
    working_dataset: tuple[str, list[str]] | None = None
    working_pipeline: str | None = None
    parameters: dict = field(default_factory=dict)
    elements: list[AnalysisElement] = field(default_factory=list)
    annotations: list[dict] = field(default_factory=list)
    jobs: dict[int, dict] = field(default_factory=dict)
    derived_from: str | None = None

    def visible_to(self, agent: str) -> bool:
        return agent == self.owner or agent in self.shared_with

    def element_by_id(self, element_id: str) -> AnalysisElement | None:
        for el in self.elements:
            if el.id == element_id:
                return el
        return None

    def to_payload(self) -> dict:
        return {
            "item": self.item_id,
            "owner": self.owner,
            "phase": self.phase,
            "shared_with": sorted(self.shared_with),
            "working_dataset": (
                {"dataset": self.working_dataset[0], "elements": list(self.working_dataset[1])}
                if self.working_dataset
                else None
            ),
            "working_pipeline": self.working_pipeline,
            "parameters": self.parameters,
            "elements": [e.to_payload() for e in self.elements],
            "annotations": self.annotations,
            "jobs": {str(k): v for k, v in sorted(self.jobs.items())},
            "derived_from": self.derived_from,
        }

    def summary(self) -> dict:
        succeeded = sum(1 for e in self.elements if e.result_state == SUCCEEDED)
        failed = sum(1 for e in self.elements if e.result_state == FAILED)
        return {
            "id": self.item_id,
            "owner": self.owner,
            "phase": self.phase,
            "shared_with": sorted(self.shared_with),
            "dataset": self.working_dataset[0] if self.working_dataset else None,
            "elements": list(self.working_dataset[1]) if self.working_dataset else [],
            "pipeline": self.working_pipeline,
            "results": {"total": len(self.elements), "succeeded": succeeded, "failed": failed},
            "derived_from": self.derived_from,
        }


def _normalize_elements(elements_payload: list, id_source) -> list[dict]:
    seen: set[str] = set()
    normalized = []
    for raw in elements_payload:
        if not isinstance(raw, dict):
            raise SchemaViolation("data element must be a map")
        element_id = raw.get("id") or id_source()
        check_item_id(element_id)
        if element_id in seen:
            raise DuplicateElement(f"element {element_id!r} declared twice")
        seen.add(element_id)
        files = raw.get("files")
        if not isinstance(files, list) or not files:
            raise SchemaViolation(f"element {element_id!r} needs a non-empty file list")
        norm_files = []
        for entry in files:
            if (
                not isinstance(entry, (list, tuple))
                or len(entry) != 2
                or not all(isinstance(part, str) and part for part in entry)
            ):
                raise SchemaViolation(f"element {element_id!r}: file entries are [path, hash] text pairs")
            norm_files.append([entry[0], entry[1]])
        metadata = raw.get("metadata", {})
        if not isinstance(metadata, dict):
            raise SchemaViolation(f"element {element_id!r}: metadata must be a map")
        normalized.append({"id": element_id, "files": norm_files, "metadata": metadata})
    return normalized


class AnalysisBase:
    """Domain layer state plus the operations that mutate it."""

    def __init__(self, ledger: "Ledger"):
        self.ledger = ledger
        self.datasets: dict[str, Dataset] = {}
        self.pipelines: dict[str, Pipeline] = {}
        self.analyses: dict[str, Analysis] = {}

    # -- operations ------------------------------------------------------

    def register_dataset(self, study_metadata: dict, elements: list, agent: str, where: str | None = None) -> Dataset:
        if not isinstance(study_metadata, dict):
            raise SchemaViolation("study_metadata must be a map")
        normalized = _normalize_elements(elements, self.ledger.new_id)
        item_id = self.ledger.new_id()
        self.ledger.commit(
            kind="dataset.create",
            who=agent,
            which=(item_id, 1),
            what="Create",
            where=where,
            how={"elements": len(normalized)},
            payload={"item": item_id, "study_metadata": study_metadata, "elements": normalized},
        )
        return self.datasets[item_id]

    def register_pipeline(
        self,
        script_location: str,
        env_settings: dict,
        common_dirs: list[str],
        stages: dict,
        agent: str,
        where: str | None = None,
    ) -> Pipeline:
        if not script_location or not isinstance(script_location, str):
            raise SchemaViolation("script_location must be non-empty text")
        if not isinstance(env_settings, dict):
            raise SchemaViolation("env_settings must be a map")
        defn = wf.WorkflowDef.from_payload(stages)
        violations = wf.validate_graph(defn)
        violations += [
            wf.Violation("composite-stage", act.name, "pipeline stages must be atomic")
            for act in defn.activities
            if act.kind != wf.ATOMIC
        ]
        if violations:
            raise InvalidGraph(violations)
        item_id = self.ledger.new_id()
        self.ledger.commit(
            kind="pipeline.create",
            who=agent,
            which=(item_id, 1),
            what="Create",
            where=where,
            how={"stages": len(defn.activities)},
            payload={
                "item": item_id,
                "script_location": script_location,
                "env_settings": env_settings,
                "common_dirs": [str(d) for d in common_dirs],
                "stages": defn.to_payload(),
            },
        )
        return self.pipelines[item_id]

    def define_analysis(self, owner: str, where: str | None = None) -> Analysis:
        item_id = self.ledger.new_id()
        self.ledger.commit(
            kind="analysis.create",
            who=owner,
            which=(item_id, 1),
            what="Create",
            where=where,
            payload={"item": item_id},
        )
        return self.analyses[item_id]

    def _owned(self, analysis_id: str, agent: str) -> Analysis:
        analysis = self.analyses.get(analysis_id)
        if analysis is None:
            raise UnknownAnalysis(f"no analysis {analysis_id!r}")
        if analysis.owner != agent:
            raise NotOwner(f"analysis {analysis_id!r} belongs to {analysis.owner!r}")
        return analysis

    def _visible(self, analysis_id: str, agent: str) -> Analysis:
        analysis = self.analyses.get(analysis_id)
        if analysis is None:
            raise UnknownAnalysis(f"no analysis {analysis_id!r}")
        if not analysis.visible_to(agent):
            raise NotVisible(f"analysis {analysis_id!r} is not shared with {agent!r}")
        return analysis

    def _check_selection(self, dataset: Dataset, element_ids: list[str]) -> list[str]:
        if not element_ids:
            raise EmptySelection("select at least one data element")
        seen: set[str] = set()
        for element_id in element_ids:
            if element_id in seen:
                raise DuplicateElement(f"element {element_id!r} selected twice")
            seen.add(element_id)
            if dataset.element(element_id) is None:
                raise UnknownElement(f"dataset {dataset.item_id!r} has no element {element_id!r}")
        return list(element_ids)

    def set_working_dataset(
        self, analysis_id: str, dataset_id: str, element_ids: list[str], agent: str, where: str | None = None
    ) -> Analysis:
        analysis = self._owned(analysis_id, agent)
        if analysis.phase not in (INVESTIGATION, DEFINITION):
            raise IllegalTransition(f"cannot change working dataset in phase {analysis.phase}")
        dataset = self.datasets.get(dataset_id)
        if dataset is None:
            raise UnknownDataset(f"no dataset {dataset_id!r}")
        selection = self._check_selection(dataset, element_ids)
        self.ledger.commit(
            kind="analysis.dataset",
            who=agent,
            which=(analysis_id, 1),
            what="SetDataset",
            where=where,
            how={"dataset": dataset_id, "elements": len(selection)},
            payload={"analysis": analysis_id, "dataset": dataset_id, "elements": selection},
        )
        return analysis

    def set_working_pipeline(
        self, analysis_id: str, pipeline_id: str, parameters: dict, agent: str, where: str | None = None
    ) -> Analysis:
        analysis = self._owned(analysis_id, agent)
        if analysis.phase not in (INVESTIGATION, DEFINITION):
            raise IllegalTransition(f"cannot change working pipeline in phase {analysis.phase}")
        if pipeline_id not in self.pipelines:
            raise UnknownPipeline(f"no pipeline {pipeline_id!r}")
        if not isinstance(parameters, dict):
            raise SchemaViolation("parameters must be a map")
        self.ledger.commit(
            kind="analysis.pipeline",
            who=agent,
            which=(analysis_id, 1),
            what="SetPipeline",
            where=where,
            how={"pipeline": pipeline_id},
            payload={"analysis": analysis_id, "pipeline": pipeline_id, "parameters": parameters},
        )
        return analysis

    def run_analysis(
        self, analysis_id: str, agent: str, broker: SimBroker, where: str | None = None
    ) -> list[AnalysisElement]:
        analysis = self._owned(analysis_id, agent)
        if analysis.phase != DEFINITION or analysis.working_dataset is None or analysis.working_pipeline is None:
            raise IncompleteDefinition("analysis needs a working dataset and pipeline, and must not have run yet")
        pipeline = self.pipelines[analysis.working_pipeline]
        dataset_id, selection = analysis.working_dataset
        planned = [{"id": self.ledger.new_id(), "data_element": element_id} for element_id in selection]
        self.ledger.commit(
            kind="analysis.run",
            who=agent,
            which=(analysis_id, 1),
            what="Run",
            where=where,
            how={"elements": len(planned)},
            payload={"analysis": analysis_id, "elements": planned},
        )

        # One activity per job: submit every enabled stage of every live
        # element, drain the broker, record one event per result, repeat.
        pending: dict[int, tuple[AnalysisElement, str]] = {}
        while True:
            submitted = False
            for element in analysis.elements:
                if element.result_state == FAILED or element.workflow.complete:
                    continue
                for path in wf.enabled_activities(pipeline.stages, element.workflow):
                    wf.apply_transition(pipeline.stages, element.workflow, path, "Start")
                    params = {
                        **pipeline.env_settings,
                        **(pipeline.stages.activity(path).params if pipeline.stages.activity(path) else {}),
                        **analysis.parameters,
                    }
                    job_id = broker.submit_job(path, element.id, pipeline.script_location, params)
                    pending[job_id] = (element, path)
                    submitted = True
            if not submitted:
                break
            for result in broker.advance():
                element, path = pending.pop(result.job)
                job = broker.job(result.job)
                transition = "Complete" if result.success else "Fail"
                self.ledger.commit(
                    kind="analysis.job",
                    who=agent,
                    which=(analysis_id, 1),
                    what=f"{path}/{transition}",
                    where=result.resource,
                    how={
                        "duration_ms": result.duration_ms,
                        "resource": result.resource,
                        "success": result.success,
                    },
                    payload={
                        "analysis": analysis_id,
                        "element": element.id,
                        "activity": path,
                        "job": result.job,
                        "script": job.script,
                        "params": job.params,
                        **result.to_payload(),
                    },
                )
        return analysis.elements

    def consolidate(self, analysis_id: str, agent: str, where: str | None = None) -> dict:
        analysis = self._visible(analysis_id, agent)
        if analysis.phase == CONSOLIDATION:
            return self.summarize(analysis)
        terminal = all(e.result_state in (SUCCEEDED, FAILED) for e in analysis.elements)
        if analysis.phase != EXECUTION or not terminal:
            raise NotTerminal("analysis still has unfinished elements")
        self.ledger.commit(
            kind="analysis.consolidate",
            who=agent,
            which=(analysis_id, 1),
            what="Consolidate",
            where=where,
            payload={"analysis": analysis_id},
        )
        return self.summarize(analysis)

    def summarize(self, analysis: Analysis) -> dict:
        """Per-element result states, per-job timings and output references."""
        rows = []
        for element in analysis.elements:
            rows.append(
                {
                    "element": element.id,
                    "data_element": element.data_element,
                    "result_state": element.result_state,
                    "jobs": [analysis.jobs[j] for j in element.job_ids],
                }
            )
        return {
            "analysis": analysis.item_id,
            "owner": analysis.owner,
            "phase": analysis.phase,
            "elements": rows,
            "counts": {
                "total": len(analysis.elements),
                "succeeded": sum(1 for e in analysis.elements if e.result_state == SUCCEEDED),
                "failed": sum(1 for e in analysis.elements if e.result_state == FAILED),
                "jobs": len(analysis.jobs),
            },
        }

    def annotate(self, analysis_id: str, text: str, agent: str, where: str | None = None) -> Analysis:
        analysis = self._visible(analysis_id, agent)
        if not text or not isinstance(text, str):
            raise SchemaViolation("annotation text must be non-empty")
        self.ledger.commit(
            kind="analysis.annotate",
            who=agent,
            which=(analysis_id, 1),
            what="Annotate",
            where=where,
            why=text,
            payload={"analysis": analysis_id, "text": text},
        )
        return analysis

    def share_analysis(self, analysis_id: str, target: str, agent: str, where: str | None = None) -> Analysis:
        analysis = self._owned(analysis_id, agent)
        if not target or not isinstance(target, str):
            raise SchemaViolation("share target must be a non-empty agent id")
        self.ledger.commit(
            kind="analysis.share",
            who=agent,
            which=(analysis_id, 1),
            what="Share",
            where=where,
            how={"target": target},
            payload={"analysis": analysis_id, "target": target},
        )
        return analysis

    def rerun_analysis(
        self,
        analysis_id: str,
        agent: str,
        broker: SimBroker,
        parameters: dict | None = None,
        element_ids: list[str] | None = None,
        where: str | None = None,
    ) -> Analysis:
        source = self._visible(analysis_id, agent)
        if source.phase != CONSOLIDATION:
            raise NotTerminal("only consolidated analyses can be re-run")
        dataset_id, source_selection = source.working_dataset
        dataset = self.datasets[dataset_id]
        selection = self._check_selection(dataset, element_ids if element_ids is not None else source_selection)
        merged = {**source.parameters, **(parameters or {})}
        item_id = self.ledger.new_id()
        self.ledger.commit(
            kind="analysis.create",
            who=agent,
            which=(item_id, 1),
            what="Create",
            where=where,
            how={"source": analysis_id},
            payload={
                "item": item_id,
                "source": analysis_id,
                "dataset": dataset_id,
                "elements": selection,
                "pipeline": source.working_pipeline,
                "parameters": merged,
            },
        )
        self.run_analysis(item_id, agent, broker, where=where)
        return self.analyses[item_id]

    def list_analyses(self, agent: str) -> list[dict]:
        return [a.summary() for a in self.analyses.values() if a.visible_to(agent)]

    def get_analysis(self, analysis_id: str, agent: str) -> Analysis:
        return self._visible(analysis_id, agent)

    # -- record application (shared by live commits and replay) ----------

    def apply(self, record) -> None:
        handler = getattr(self, "_apply_" + record.kind.split(".", 1)[1])
        handler(record)

    def _builtin_item(self, name: str, item_id: str) -> None:
        description = BUILTIN_BY_NAME[name]
        self.ledger.create_item_state(
            item_id=item_id,
            description_id=description.id,
            version=1,
            properties={},
        )

    def _apply_create(self, record) -> None:
        payload = record.payload
        if "source" in payload:
            self._builtin_item("Analysis", payload["item"])
            self.analyses[payload["item"]] = Analysis(
                item_id=payload["item"],
                owner=record.who,
                phase=DEFINITION,
                working_dataset=(payload["dataset"], list(payload["elements"])),
                working_pipeline=payload["pipeline"],
                parameters=dict(payload["parameters"]),
                derived_from=payload["source"],
            )
        elif record.kind == "analysis.create":
            self._builtin_item("Analysis", payload["item"])
            self.analyses[payload["item"]] = Analysis(item_id=payload["item"], owner=record.who)
        elif record.kind == "dataset.create":
            self._builtin_item("Dataset", payload["item"])
            self.datasets[payload["item"]] = Dataset(
                item_id=payload["item"],
                study_metadata=payload["study_metadata"],
                elements=[DataElement(**e) for e in payload["elements"]],
            )
        else:
            self._builtin_item("Pipeline", payload["item"])
            self.pipelines[payload["item"]] = Pipeline(
                item_id=payload["item"],
                script_location=payload["script_location"],
                env_settings=payload["env_settings"],
                common_dirs=payload["common_dirs"],
                stages=wf.WorkflowDef.from_payload(payload["stages"]),
            )

    def _apply_dataset(self, record) -> None:
        analysis = self.analyses[record.payload["analysis"]]
        analysis.working_dataset = (record.payload["dataset"], list(record.payload["elements"]))
        if analysis.phase == INVESTIGATION:
            analysis.phase = DEFINITION

    def _apply_pipeline(self, record) -> None:
        analysis = self.analyses[record.payload["analysis"]]
        analysis.working_pipeline = record.payload["pipeline"]
        analysis.parameters = dict(record.payload["parameters"])

    def _apply_run(self, record) -> None:
        analysis = self.analyses[record.payload["analysis"]]
        pipeline = self.pipelines[analysis.working_pipeline]
        for planned in record.payload["elements"]:
            analysis.elements.append(
                AnalysisElement(
                    id=planned["id"],
                    analysis=analysis.item_id,
                    data_element=planned["data_element"],
                    workflow=wf.instantiate_workflow(pipeline.stages, (pipeline.item_id, 1)),
                )
            )
        analysis.phase = EXECUTION

    def _apply_job(self, record) -> None:
        payload = record.payload
        analysis = self.analyses[payload["analysis"]]
        pipeline = self.pipelines[analysis.working_pipeline]
        element = analysis.element_by_id(payload["element"])
        path = payload["activity"]
        # Live execution already fired Start at submission time; replay
        # fires it here so the traversed states match either way.
        if element.workflow.states.get(path.split("/", 1)[0]) == wf.WAITING:
            wf.apply_transition(pipeline.stages, element.workflow, path, "Start")
        transition = "Complete" if payload["success"] else "Fail"
        wf.apply_transition(pipeline.stages, element.workflow, path, transition)
        element.job_ids.append(payload["job"])
        analysis.jobs[payload["job"]] = {
            "job": payload["job"],
            "element": payload["element"],
            "activity": path,
            "script": payload["script"],
            "params": payload["params"],
            "resource": payload["resource"],
            "started_at": payload["started_at"],
            "finished_at": payload["finished_at"],
            "duration_ms": payload["duration_ms"],
            "success": payload["success"],
            "output_ref": payload["output_ref"],
        }
        job_success = [analysis.jobs[j]["success"] for j in element.job_ids]
        if not all(job_success):
            element.result_state = FAILED
        elif element.workflow.complete:
            element.result_state = SUCCEEDED
        else:
            element.result_state = RUNNING

    def _apply_consolidate(self, record) -> None:
        self.analyses[record.payload["analysis"]].phase = CONSOLIDATION

    def _apply_annotate(self, record) -> None:
        analysis = self.analyses[record.payload["analysis"]]
        analysis.annotations.append({"agent": record.who, "when": record.when, "text": record.payload["text"]})

    def _apply_share(self, record) -> None:
        self.analyses[record.payload["analysis"]].shared_with.add(record.payload["target"])

    def snapshot_payload(self) -> dict:
        return {
            "datasets": {k: v.to_payload() for k, v in self.datasets.items()},
            "pipelines": {k: v.to_payload() for k, v in self.pipelines.items()},
            "analyses": {k: v.to_payload() for k, v in self.analyses.items()},
        }
