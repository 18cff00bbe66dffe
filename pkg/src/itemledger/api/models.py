"""Request bodies for the gateway endpoints."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class PropertyField(BaseModel):
    name: str
    kind: str
    required: bool = False


class ActivityModel(BaseModel):
    name: str
    kind: str = "atomic"
    sub_workflow: Optional["WorkflowModel"] = None
    has_outcome: bool = False
    params: dict[str, Any] = Field(default_factory=dict)


class WorkflowModel(BaseModel):
    activities: list[ActivityModel]
    edges: list[list[str]] = Field(default_factory=list)
    start: str

    def to_payload(self) -> dict:
        return self.model_dump(exclude_none=True)


class VersionPayload(BaseModel):
    property_schema: list[PropertyField] = Field(default_factory=list)
    workflow: WorkflowModel
    outcome_schemas: dict[str, list[PropertyField]] = Field(default_factory=dict)

    def to_payload(self) -> dict:
        return self.model_dump(exclude_none=True)


class DescriptionCreate(BaseModel):
    name: str
    version: VersionPayload


class ItemCreate(BaseModel):
    description: str
    version: int
    properties: dict[str, Any] = Field(default_factory=dict)


class TransitionRequest(BaseModel):
    activity: str
    transition: str
    outcome: Optional[dict[str, Any]] = None


class ElementPayload(BaseModel):
    id: Optional[str] = None
    files: list[list[str]]
    metadata: dict[str, Any] = Field(default_factory=dict)


class DatasetCreate(BaseModel):
    study_metadata: dict[str, Any] = Field(default_factory=dict)
    elements: list[ElementPayload] = Field(default_factory=list)


class PipelineCreate(BaseModel):
    script_location: str
    env_settings: dict[str, Any] = Field(default_factory=dict)
    common_dirs: list[str] = Field(default_factory=list)
    stages: WorkflowModel


class DatasetSelect(BaseModel):
    dataset: str
    elements: list[str]


class PipelineSelect(BaseModel):
    pipeline: str
    parameters: dict[str, Any] = Field(default_factory=dict)


class BrokerSettings(BaseModel):
    seed: int = 42
    nodes: list[str] = Field(default_factory=lambda: ["node-1", "node-2"])
    base_duration_ms: int = 100
    jitter_ms: int = 50
    failure_rate: float = 0.0


class RunRequest(BrokerSettings):
    pass


class RerunRequest(BrokerSettings):
    parameters: Optional[dict[str, Any]] = None
    elements: Optional[list[str]] = None


class AnnotationCreate(BaseModel):
    text: str


class ShareRequest(BaseModel):
    target: str
