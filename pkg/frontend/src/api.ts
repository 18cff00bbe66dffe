// Typed client for the gateway HTTP API. The dashboard issues only these
// endpoints and renders only what they return.

export interface ResultTable {
    columns: string[];
    rows: string[][];
}

export interface AnalysisSummary {
    id: string;
    owner: string;
    phase: string;
    shared_with: string[];
    dataset: string | null;
    elements: string[];
    pipeline: string | null;
    results: { total: number; succeeded: number; failed: number };
    derived_from: string | null;
}

export interface WorkflowInstance {
    def_ref: { id: string; version: number };
    states: Record<string, string>;
    complete: boolean;
}

export interface AnalysisElement {
    id: string;
    analysis: string;
    data_element: string;
    workflow: WorkflowInstance;
    job_ids: number[];
    result_state: string;
}

export interface JobRecord {
    job: number;
    element: string;
    activity: string;
    script: string;
    params: Record<string, unknown>;
    resource: string;
    started_at: string;
    finished_at: string;
    duration_ms: number;
    success: boolean;
    output_ref: string;
}

export interface AnalysisDetail {
    item: string;
    owner: string;
    phase: string;
    shared_with: string[];
    working_dataset: { dataset: string; elements: string[] } | null;
    working_pipeline: string | null;
    parameters: Record<string, unknown>;
    elements: AnalysisElement[];
    annotations: { agent: string; when: string; text: string }[];
    jobs: Record<string, JobRecord>;
    derived_from: string | null;
}

export interface DatasetDetail {
    item: string;
    study_metadata: Record<string, unknown>;
    elements: { id: string; files: string[][]; metadata: Record<string, unknown> }[];
}

export interface ProvDocument {
    entities: { id: string; kind: string }[];
    activities: { id: string; label: string; start: string; end: string }[];
    agents: { id: string }[];
    relations: { kind: string; from: string; to: string }[];
}

export interface RunSettings {
    seed?: number;
    failure_rate?: number;
}

export class GatewayError extends Error {
    constructor(public status: number, public error: string, public detail: string) {
        super(`${error}: ${detail}`);
    }
}

export class Gateway {
    constructor(public baseUrl: string, public agent: string) {}

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const headers: Record<string, string> = { "X-Agent": this.agent };
        if (body !== undefined) headers["Content-Type"] = "application/json";
        let response: Response;
        try {
            response = await fetch(this.baseUrl + path, {
                method,
                headers,
                body: body === undefined ? undefined : JSON.stringify(body),
            });
        } catch (err) {
            throw new GatewayError(0, "GatewayUnreachable", String(err));
        }
        const payload = await response.json().catch(() => ({}));
        if (!response.ok) {
            throw new GatewayError(
                response.status,
                (payload as any).error ?? "GatewayError",
                JSON.stringify((payload as any).detail ?? payload),
            );
        }
        return payload as T;
    }

    listAnalyses(): Promise<{ analyses: AnalysisSummary[] }> {
        return this.request("GET", "/analyses");
    }

    getAnalysis(id: string): Promise<AnalysisDetail> {
        return this.request("GET", `/analyses/${id}`);
    }

    queryItems(kind: string, predicates: string[]): Promise<ResultTable> {
        const params = new URLSearchParams({ kind });
        for (const predicate of predicates) params.append("q", predicate);
        return this.request("GET", `/query/items?${params.toString()}`);
    }

    queryEvents(predicates: string[]): Promise<ResultTable> {
        const params = new URLSearchParams();
        for (const predicate of predicates) params.append("q", predicate);
        return this.request("GET", `/query/events?${params.toString()}`);
    }

    getDataset(id: string): Promise<DatasetDetail> {
        return this.request("GET", `/datasets/${id}`);
    }

    defineAnalysis(): Promise<AnalysisDetail> {
        return this.request("POST", "/analyses");
    }

    setDataset(analysis: string, dataset: string, elements: string[]): Promise<AnalysisDetail> {
        return this.request("PUT", `/analyses/${analysis}/dataset`, { dataset, elements });
    }

    setPipeline(analysis: string, pipeline: string, parameters: Record<string, string>): Promise<AnalysisDetail> {
        return this.request("PUT", `/analyses/${analysis}/pipeline`, { pipeline, parameters });
    }

    run(analysis: string, settings: RunSettings): Promise<{ elements: AnalysisElement[] }> {
        return this.request("POST", `/analyses/${analysis}/run`, settings);
    }

    consolidate(analysis: string): Promise<unknown> {
        return this.request("POST", `/analyses/${analysis}/consolidate`);
    }

    annotate(analysis: string, text: string): Promise<AnalysisDetail> {
        return this.request("POST", `/analyses/${analysis}/annotations`, { text });
    }

    share(analysis: string, target: string): Promise<AnalysisDetail> {
        return this.request("POST", `/analyses/${analysis}/share`, { target });
    }

    rerun(analysis: string, settings: RunSettings & { parameters?: Record<string, string>; elements?: string[] }): Promise<AnalysisDetail> {
        return this.request("POST", `/analyses/${analysis}/rerun`, settings);
    }

    getProv(analysis: string): Promise<ProvDocument> {
        return this.request("GET", `/prov/${analysis}`);
    }
}
