// Dashboard shell: agent switcher, the investigation / definition /
// monitoring views, and the polling loop. All data comes from the
// gateway; nothing except the chosen agent survives a reload.

import { Gateway, GatewayError } from "./api.js";
import { renderProvSvg } from "./graph.js";
import {
    renderAnalysisList,
    renderErrorBanner,
    renderMonitor,
    renderTable,
    escapeHtml,
} from "./render.js";
import {
    PREDICATE_OPS,
    analysisListRows,
    monitorModel,
    provGraphModel,
    serializePredicate,
    tableModel,
} from "./state.js";

const POLL_INTERVAL_MS = Number(new URLSearchParams(location.search).get("poll") ?? "1000");
const BASE_URL = new URLSearchParams(location.search).get("gateway") ?? "";

class Dashboard {
    gateway: Gateway;
    root: HTMLElement;
    view: "investigate" | "define" | "monitor" = "investigate";
    selectedAnalysis: string | null = null;
    poller: number | null = null;
    predicates: string[] = [];

    constructor(root: HTMLElement) {
        this.root = root;
        this.gateway = new Gateway(BASE_URL, localStorage.getItem("agent") ?? "alice");
        this.shell();
        void this.showInvestigation();
    }

    shell(): void {
        this.root.innerHTML =
            `<header>` +
            `<h1>itemledger</h1>` +
            `<nav>` +
            `<button id="nav-investigate">Investigate</button>` +
            `<button id="nav-define">Define</button>` +
            `</nav>` +
            `<label>agent <input id="agent-input" value="${escapeHtml(this.gateway.agent)}" size="10"></label>` +
            `</header>` +
            `<div id="banner"></div>` +
            `<main id="view"></main>`;
        this.el("nav-investigate").onclick = () => void this.showInvestigation();
        this.el("nav-define").onclick = () => void this.showDefinition();
        const agentInput = this.el<HTMLInputElement>("agent-input");
        agentInput.onchange = () => {
            this.gateway.agent = agentInput.value.trim() || "alice";
            localStorage.setItem("agent", this.gateway.agent);
            void this.showInvestigation();
        };
    }

    el<T extends HTMLElement = HTMLElement>(id: string): T {
        return document.getElementById(id) as T;
    }

    banner(message: string | null): void {
        this.el("banner").innerHTML = message === null ? "" : renderErrorBanner(message);
    }

    stopPolling(): void {
        if (this.poller !== null) {
            clearInterval(this.poller);
            this.poller = null;
        }
    }

    async guard<T>(work: () => Promise<T>): Promise<T | undefined> {
        try {
            const result = await work();
            this.banner(null);
            return result;
        } catch (err) {
            if (err instanceof GatewayError) {
                this.banner(`${err.error} (${err.status || "offline"}): ${err.detail}`);
            } else {
                this.banner(String(err));
            }
            return undefined;
        }
    }

    // -- investigation ------------------------------------------------------

    async showInvestigation(): Promise<void> {
        this.stopPolling();
        this.view = "investigate";
        const view = this.el("view");
        view.innerHTML =
            `<section><h2>Analyses</h2><div id="analysis-list"></div></section>` +
            `<section><h2>Query the analysis base</h2>` +
            `<div class="query-builder">` +
            `kind <select id="q-kind"><option>dataset</option><option>pipeline</option><option>analysis</option>` +
            `<option>item</option><option>description</option></select> ` +
            `field <input id="q-field" size="14"> ` +
            `op <select id="q-op">${PREDICATE_OPS.map((op) => `<option>${op}</option>`).join("")}</select> ` +
            `value <input id="q-value" size="10"> ` +
            `<button id="q-add">add predicate</button> <button id="q-run">run query</button>` +
            `<div id="q-predicates"></div></div>` +
            `<div id="q-result"></div></section>`;
        this.el("q-add").onclick = () => {
            const draft = {
                field: this.el<HTMLInputElement>("q-field").value.trim(),
                op: this.el<HTMLSelectElement>("q-op").value,
                value: this.el<HTMLInputElement>("q-value").value.trim(),
            };
            if (draft.field) this.predicates.push(serializePredicate(draft));
            this.el("q-predicates").textContent = this.predicates.join("  AND  ");
        };
        this.el("q-run").onclick = () => void this.runQuery();
        await this.refreshAnalyses();
    }

    async refreshAnalyses(): Promise<void> {
        const payload = await this.guard(() => this.gateway.listAnalyses());
        if (!payload) return;
        this.el("analysis-list").innerHTML = renderAnalysisList(analysisListRows(payload));
        for (const button of Array.from(document.querySelectorAll<HTMLButtonElement>(".open-analysis"))) {
            button.onclick = () => void this.showMonitor(button.dataset.id!);
        }
    }

    async runQuery(): Promise<void> {
        const kind = this.el<HTMLSelectElement>("q-kind").value;
        const table = await this.guard(() => this.gateway.queryItems(kind, this.predicates));
        if (!table) return;
        this.el("q-result").innerHTML = renderTable(tableModel(table));
        this.predicates = [];
        this.el("q-predicates").textContent = "";
    }

    // -- definition wizard -----------------------------------------------------

    async showDefinition(): Promise<void> {
        this.stopPolling();
        this.view = "define";
        const view = this.el("view");
        const datasets = await this.guard(() => this.gateway.queryItems("dataset", []));
        const pipelines = await this.guard(() => this.gateway.queryItems("pipeline", []));
        if (!datasets || !pipelines) return;
        const datasetIds = datasets.rows.map((row) => row[0]);
        const pipelineIds = pipelines.rows.map((row) => row[0]);
        view.innerHTML =
            `<section><h2>Define a new analysis</h2>` +
            `<ol class="wizard">` +
            `<li>dataset <select id="w-dataset">${datasetIds.map((d) => `<option>${d}</option>`).join("")}</select>` +
            `<div id="w-elements"></div></li>` +
            `<li>pipeline <select id="w-pipeline">${pipelineIds.map((p) => `<option>${p}</option>`).join("")}</select></li>` +
            `<li>parameters (name=value per line)<br><textarea id="w-params" rows="3" cols="40"></textarea></li>` +
            `<li>broker seed <input id="w-seed" value="42" size="8"></li>` +
            `<li><button id="w-launch">Create and run</button></li>` +
            `</ol></section>`;
        const datasetSelect = this.el<HTMLSelectElement>("w-dataset");
        const loadElements = async () => {
            if (!datasetSelect.value) return;
            const detail = await this.guard(() => this.gateway.getDataset(datasetSelect.value));
            if (!detail) return;
            this.el("w-elements").innerHTML = detail.elements
                .map(
                    (element) =>
                        `<label class="element-pick"><input type="checkbox" class="w-element" checked ` +
                        `value="${escapeHtml(element.id)}"> <span class="mono">${escapeHtml(element.id.slice(0, 8))}</span> ` +
                        `${escapeHtml(String(element.metadata["subject"] ?? ""))}</label>`,
                )
                .join("<br>");
        };
        datasetSelect.onchange = () => void loadElements();
        await loadElements();
        this.el("w-launch").onclick = () => void this.launch();
    }

    parseParams(): Record<string, string> {
        const params: Record<string, string> = {};
        for (const line of this.el<HTMLTextAreaElement>("w-params").value.split("\n")) {
            const at = line.indexOf("=");
            if (at > 0) params[line.slice(0, at).trim()] = line.slice(at + 1).trim();
        }
        return params;
    }

    async launch(): Promise<void> {
        const datasetId = this.el<HTMLSelectElement>("w-dataset").value;
        const pipelineId = this.el<HTMLSelectElement>("w-pipeline").value;
        const elements = Array.from(document.querySelectorAll<HTMLInputElement>(".w-element"))
            .filter((box) => box.checked)
            .map((box) => box.value);
        const seed = Number(this.el<HTMLInputElement>("w-seed").value || "42");
        const created = await this.guard(async () => {
            const analysis = await this.gateway.defineAnalysis();
            await this.gateway.setDataset(analysis.item, datasetId, elements);
            await this.gateway.setPipeline(analysis.item, pipelineId, this.parseParams());
            await this.gateway.run(analysis.item, { seed });
            return analysis.item;
        });
        if (created) await this.showMonitor(created);
    }

    // -- execution monitor -------------------------------------------------------

    async showMonitor(analysisId: string): Promise<void> {
        this.stopPolling();
        this.view = "monitor";
        this.selectedAnalysis = analysisId;
        this.el("view").innerHTML = `<section id="monitor-host">loading…</section>`;
        await this.pollOnce();
        this.poller = window.setInterval(() => void this.pollOnce(), POLL_INTERVAL_MS);
    }

    async pollOnce(): Promise<void> {
        if (this.view !== "monitor" || !this.selectedAnalysis) return;
        const detail = await this.guard(() => this.gateway.getAnalysis(this.selectedAnalysis!));
        if (!detail) return; // failure shown in the banner; next tick retries
        const model = monitorModel(detail);
        this.el("monitor-host").innerHTML = renderMonitor(model);
        if (model.terminal) {
            this.stopPolling();
            this.wireActions();
            const doc = await this.guard(() => this.gateway.getProv(model.id));
            if (doc) this.el("prov-panel").innerHTML = `<h4>Provenance graph</h4>` + renderProvSvg(provGraphModel(doc));
        }
    }

    wireActions(): void {
        const id = this.selectedAnalysis!;
        this.el("act-consolidate").onclick = () =>
            void this.guard(() => this.gateway.consolidate(id)).then(() => this.pollOnce());
        this.el("act-annotate").onclick = () => {
            const text = prompt("annotation");
            if (text) void this.guard(() => this.gateway.annotate(id, text)).then(() => this.pollOnce());
        };
        this.el("act-share").onclick = () => {
            const target = prompt("share with agent");
            if (target) void this.guard(() => this.gateway.share(id, target));
        };
        this.el("act-rerun").onclick = () =>
            void this.guard(() => this.gateway.rerun(id, { seed: 43 })).then(
                (rerun) => rerun && this.showMonitor(rerun.item),
            );
    }
}

const rootElement = document.getElementById("app");
if (rootElement) new Dashboard(rootElement);
