// Pure view-model builders. Every figure shown in the UI comes straight
// from a gateway response field; the functions here only regroup and
// format, never derive new numbers. That invariant is what the dashboard
// tests check against captured gateway fixtures.

import type { AnalysisDetail, AnalysisSummary, ProvDocument, ResultTable } from "./api.js";

export interface TableModel {
    columns: string[];
    rows: string[][];
    rowCount: number;
}

export function tableModel(payload: ResultTable): TableModel {
    return { columns: payload.columns, rows: payload.rows, rowCount: payload.rows.length };
}

export interface AnalysisListRow {
    id: string;
    owner: string;
    phase: string;
    pipeline: string;
    selectedElements: number;
    succeeded: number;
    failed: number;
    total: number;
    sharedWith: string;
}

export function analysisListRows(payload: { analyses: AnalysisSummary[] }): AnalysisListRow[] {
    return payload.analyses.map((summary) => ({
        id: summary.id,
        owner: summary.owner,
        phase: summary.phase,
        pipeline: summary.pipeline ?? "",
        selectedElements: summary.elements.length,
        succeeded: summary.results.succeeded,
        failed: summary.results.failed,
        total: summary.results.total,
        sharedWith: summary.shared_with.join(", "),
    }));
}

export interface JobRow {
    job: number;
    activity: string;
    resource: string;
    durationMs: number;
    success: boolean;
    outputRef: string;
}

export interface ElementRow {
    id: string;
    dataElement: string;
    resultState: string;
    stageStates: { stage: string; state: string }[];
    jobs: JobRow[];
}

export function elementRows(detail: AnalysisDetail): ElementRow[] {
    return detail.elements.map((element) => ({
        id: element.id,
        dataElement: element.data_element,
        resultState: element.result_state,
        stageStates: Object.entries(element.workflow.states).map(([stage, state]) => ({ stage, state })),
        jobs: element.job_ids.map((jobId) => {
            const job = detail.jobs[String(jobId)];
            return {
                job: job.job,
                activity: job.activity,
                resource: job.resource,
                durationMs: job.duration_ms,
                success: job.success,
                outputRef: job.output_ref,
            };
        }),
    }));
}

export interface MonitorModel {
    id: string;
    owner: string;
    phase: string;
    terminal: boolean;
    elements: ElementRow[];
    jobCount: number;
    succeeded: number;
    failed: number;
    annotations: { agent: string; when: string; text: string }[];
}

export function monitorModel(detail: AnalysisDetail): MonitorModel {
    const rows = elementRows(detail);
    return {
        id: detail.item,
        owner: detail.owner,
        phase: detail.phase,
        terminal: rows.length > 0 && rows.every((r) => r.resultState === "Succeeded" || r.resultState === "Failed"),
        elements: rows,
        jobCount: Object.keys(detail.jobs).length,
        succeeded: rows.filter((r) => r.resultState === "Succeeded").length,
        failed: rows.filter((r) => r.resultState === "Failed").length,
        annotations: detail.annotations,
    };
}

export interface GraphNode {
    id: string;
    kind: string;
    label: string;
}

export interface GraphEdge {
    from: string;
    to: string;
    kind: string;
}

export interface ProvGraphModel {
    nodes: GraphNode[];
    entityNodes: GraphNode[];
    activityNodes: GraphNode[];
    agentNodes: GraphNode[];
    edges: GraphEdge[];
}

export function provGraphModel(doc: ProvDocument): ProvGraphModel {
    const entityNodes = doc.entities.map((entity) => ({ id: entity.id, kind: entity.kind, label: entity.id }));
    const activityNodes = doc.activities.map((activity) => ({ id: activity.id, kind: "job", label: activity.label }));
    const agentNodes = doc.agents.map((agent) => ({ id: agent.id, kind: "agent", label: agent.id }));
    return {
        nodes: [...entityNodes, ...activityNodes, ...agentNodes],
        entityNodes,
        activityNodes,
        agentNodes,
        edges: doc.relations.map((relation) => ({ from: relation.from, to: relation.to, kind: relation.kind })),
    };
}

// query-builder state: predicates under construction, serialized in the
// gateway's field:op:value form
export interface PredicateDraft {
    field: string;
    op: string;
    value: string;
}

export const PREDICATE_OPS = ["eq", "neq", "lt", "lte", "gt", "gte", "contains"];

export function serializePredicate(draft: PredicateDraft): string {
    return `${draft.field}:${draft.op}:${draft.value}`;
}
