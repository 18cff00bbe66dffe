"""JSON-over-HTTP gateway.

Stateless service surface over one store: agent identity arrives in the
X-Agent header, every mutation funnels through the ledger's single
writer, and domain errors map onto 403 / 404 / 422. Restarting the
process between requests changes nothing because all state lives in the
log file.
"""

from __future__ import annotations

import os
import threading
from pathlib import Path

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import provenance
from ..broker import BrokerConfig, SimBroker
from ..errors import (
    LedgerError,
    NotOwner,
    NotVisible,
    StorageFailure,
    UnknownActivity,
    UnknownAnalysis,
    UnknownDataset,
    UnknownDescription,
    UnknownElement,
    UnknownField,
    UnknownItem,
    UnknownJob,
    UnknownKind,
    UnknownPipeline,
    UnknownVersion,
)
from ..ledger import Ledger
from . import models

_NOT_FOUND = (
    UnknownDescription,
    UnknownVersion,
    UnknownItem,
    UnknownActivity,
    UnknownDataset,
    UnknownElement,
    UnknownPipeline,
    UnknownAnalysis,
    UnknownJob,
    UnknownField,
    UnknownKind,
)


def error_status(exc: LedgerError) -> int:
    if isinstance(exc, (NotOwner, NotVisible)):
        return 403
    if isinstance(exc, _NOT_FOUND):
        return 404
    if isinstance(exc, StorageFailure):
        return 500
    return 422


def require_agent(x_agent: str | None = Header(default=None)) -> str:
    if not x_agent:
        raise HTTPException(status_code=400, detail="X-Agent header required")
    return x_agent


def _record_payload(record) -> dict:
    return record.to_payload()


def _broker_for(ledger: Ledger, settings: models.BrokerSettings) -> SimBroker:
    config = BrokerConfig(
        seed=settings.seed,
        nodes=tuple(settings.nodes),
        base_duration_ms=settings.base_duration_ms,
        jitter_ms=settings.jitter_ms,
        failure_rate=settings.failure_rate,
    )
    return SimBroker(config, clock=ledger.clock)


def _parse_predicates(q: list[str]) -> list[provenance.Predicate]:
    return [provenance.Predicate.parse(text) for text in q]


def _table_response(table: provenance.ResultTable, format: str):
    fmt = format.lower()
    if fmt == "json":
        return table.to_payload()
    body = provenance.export_table(table, fmt)
    media = "text/csv" if fmt == "csv" else "application/xml"
    return Response(content=body, media_type=media + "; charset=utf-8")


def create_app(
    ledger: Ledger | None = None,
    store_path: str | None = None,
    where: str = "gateway",
    ui_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="itemledger gateway", version="0.1.0")
    app.state.ledger = ledger if ledger is not None else Ledger.from_env(store_path, where=where)
    app.state.lock = threading.Lock()

    ui_dir = ui_dir or os.environ.get("ITEMLEDGER_UI")
    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    def current() -> Ledger:
        return app.state.ledger

    @app.exception_handler(LedgerError)
    async def ledger_error_handler(request: Request, exc: LedgerError):
        return JSONResponse(
            status_code=error_status(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.exception_handler(RequestValidationError)
    async def malformed_body_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "MalformedRequest", "detail": exc.errors()})

    # -- kernel ----------------------------------------------------------

    @app.post("/descriptions", status_code=201)
    def register_description(body: models.DescriptionCreate, agent: str = Depends(require_agent)):
        with app.state.lock:
            description_id, version = current().register_description(body.name, body.version.to_payload(), agent)
        return {"id": description_id, "version": version}

    @app.post("/descriptions/{description_id}/versions", status_code=201)
    def add_description_version(description_id: str, body: models.VersionPayload, agent: str = Depends(require_agent)):
        with app.state.lock:
            version = current().add_description_version(description_id, body.to_payload(), agent)
        return {"id": description_id, "version": version}

    @app.get("/descriptions/{description_id}/versions/{version}")
    def resolve_description(description_id: str, version: int):
        return current().resolve_description(description_id, version).to_payload()

    @app.post("/items", status_code=201)
    def instantiate_item(body: models.ItemCreate, agent: str = Depends(require_agent)):
        with app.state.lock:
            item = current().instantiate_item(body.description, body.version, body.properties, agent)
        return item.to_payload()

    @app.get("/items/{item_id}")
    def get_item(item_id: str):
        return current().item(item_id).to_payload()

    @app.get("/items/{item_id}/events")
    def item_events(item_id: str):
        return {"events": [_record_payload(r) for r in current().item_history(item_id)]}

    @app.post("/items/{item_id}/transitions")
    def fire_transition(item_id: str, body: models.TransitionRequest, agent: str = Depends(require_agent)):
        with app.state.lock:
            item, record = current().fire_transition(
                item_id, body.activity, body.transition, agent, outcome_fields=body.outcome
            )
        return {"item": item.to_payload(), "event": _record_payload(record)}

    @app.post("/items/{item_id}/migrate")
    def migrate_item(item_id: str, body: dict, agent: str = Depends(require_agent)):
        target = body.get("version")
        if not isinstance(target, int):
            raise HTTPException(status_code=400, detail="body needs integer 'version'")
        with app.state.lock:
            item = current().migrate_item(item_id, target, agent)
        return item.to_payload()

    # -- analysis layer --------------------------------------------------

    @app.post("/datasets", status_code=201)
    def register_dataset(body: models.DatasetCreate, agent: str = Depends(require_agent)):
        with app.state.lock:
            dataset = current().analysis.register_dataset(
                body.study_metadata, [e.model_dump() for e in body.elements], agent
            )
        return dataset.to_payload()

    @app.get("/datasets/{dataset_id}")
    def get_dataset(dataset_id: str):
        dataset = current().analysis.datasets.get(dataset_id)
        if dataset is None:
            raise UnknownDataset(f"no dataset {dataset_id!r}")
        return dataset.to_payload()

    @app.post("/pipelines", status_code=201)
    def register_pipeline(body: models.PipelineCreate, agent: str = Depends(require_agent)):
        with app.state.lock:
            pipeline = current().analysis.register_pipeline(
                body.script_location, body.env_settings, body.common_dirs, body.stages.to_payload(), agent
            )
        return pipeline.to_payload()

    @app.get("/pipelines/{pipeline_id}")
    def get_pipeline(pipeline_id: str):
        pipeline = current().analysis.pipelines.get(pipeline_id)
        if pipeline is None:
            raise UnknownPipeline(f"no pipeline {pipeline_id!r}")
        return pipeline.to_payload()

    @app.post("/analyses", status_code=201)
    def define_analysis(agent: str = Depends(require_agent)):
        with app.state.lock:
            analysis = current().analysis.define_analysis(agent)
        return analysis.to_payload()

    @app.get("/analyses")
    def list_analyses(agent: str = Depends(require_agent)):
        return {"analyses": current().analysis.list_analyses(agent)}

    @app.get("/analyses/{analysis_id}")
    def get_analysis(analysis_id: str, agent: str = Depends(require_agent)):
        return current().analysis.get_analysis(analysis_id, agent).to_payload()

    @app.put("/analyses/{analysis_id}/dataset")
    def set_working_dataset(analysis_id: str, body: models.DatasetSelect, agent: str = Depends(require_agent)):
        with app.state.lock:
            analysis = current().analysis.set_working_dataset(analysis_id, body.dataset, body.elements, agent)
        return analysis.to_payload()

    @app.put("/analyses/{analysis_id}/pipeline")
    def set_working_pipeline(analysis_id: str, body: models.PipelineSelect, agent: str = Depends(require_agent)):
        with app.state.lock:
            analysis = current().analysis.set_working_pipeline(analysis_id, body.pipeline, body.parameters, agent)
        return analysis.to_payload()

    @app.post("/analyses/{analysis_id}/run")
    def run_analysis(analysis_id: str, body: models.RunRequest | None = None, agent: str = Depends(require_agent)):
        settings = body or models.RunRequest()
        with app.state.lock:
            ledger = current()
            elements = ledger.analysis.run_analysis(analysis_id, agent, _broker_for(ledger, settings))
        return {"elements": [e.to_payload() for e in elements]}

    @app.post("/analyses/{analysis_id}/consolidate")
    def consolidate(analysis_id: str, agent: str = Depends(require_agent)):
        with app.state.lock:
            return current().analysis.consolidate(analysis_id, agent)

    @app.post("/analyses/{analysis_id}/annotations")
    def annotate(analysis_id: str, body: models.AnnotationCreate, agent: str = Depends(require_agent)):
        with app.state.lock:
            analysis = current().analysis.annotate(analysis_id, body.text, agent)
        return analysis.to_payload()

    @app.post("/analyses/{analysis_id}/share")
    def share_analysis(analysis_id: str, body: models.ShareRequest, agent: str = Depends(require_agent)):
        with app.state.lock:
            analysis = current().analysis.share_analysis(analysis_id, body.target, agent)
        return analysis.to_payload()

    @app.post("/analyses/{analysis_id}/rerun", status_code=201)
    def rerun_analysis(analysis_id: str, body: models.RerunRequest | None = None, agent: str = Depends(require_agent)):
        settings = body or models.RerunRequest()
        with app.state.lock:
            ledger = current()
            analysis = ledger.analysis.rerun_analysis(
                analysis_id,
                agent,
                _broker_for(ledger, settings),
                parameters=settings.parameters,
                element_ids=settings.elements,
            )
        return analysis.to_payload()

    # -- queries, exports, provenance -------------------------------------

    @app.get("/query/items")
    def get_query_items(
        kind: str = Query(default="item"),
        q: list[str] = Query(default=[]),
        format: str = Query(default="json"),
        x_agent: str | None = Header(default=None),
    ):
        table = provenance.query_items(current(), kind, _parse_predicates(q), agent=x_agent)
        return _table_response(table, format)

    @app.get("/query/events")
    def get_query_events(q: list[str] = Query(default=[]), format: str = Query(default="json")):
        table = provenance.query_events(current(), _parse_predicates(q))
        return _table_response(table, format)

    @app.get("/prov/{analysis_id}")
    def get_prov(analysis_id: str, agent: str = Depends(require_agent)):
        return provenance.export_prov(current(), analysis_id, agent).to_payload()

    return app
