// HTML string renderers for the view models. Pure functions so the tests
// can assert on markup without a browser.

import type { AnalysisListRow, ElementRow, MonitorModel, TableModel } from "./state.js";

export function escapeHtml(text: string): string {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}

export function renderTable(model: TableModel): string {
    const head = model.columns.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
    const body = model.rows
        .map((row) => `<tr>${row.map((cell) => `<td>${escapeHtml(cell)}</td>`).join("")}</tr>`)
        .join("");
    return `<table class="result-table"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

export function renderAnalysisList(rows: AnalysisListRow[]): string {
    if (rows.length === 0) {
        return `<p class="empty">No analyses visible to this agent yet.</p>`;
    }
    const body = rows
        .map(
            (row) =>
                `<tr class="analysis-row" data-id="${escapeHtml(row.id)}">` +
                `<td class="mono">${escapeHtml(row.id.slice(0, 8))}</td>` +
                `<td>${escapeHtml(row.owner)}</td>` +
                `<td><span class="phase phase-${escapeHtml(row.phase)}">${escapeHtml(row.phase)}</span></td>` +
                `<td>${row.selectedElements}</td>` +
                `<td>${row.succeeded}/${row.total}</td>` +
                `<td>${escapeHtml(row.sharedWith)}</td>` +
                `<td><button class="open-analysis" data-id="${escapeHtml(row.id)}">open</button></td>` +
                `</tr>`,
        )
        .join("");
    return (
        `<table class="analysis-list"><thead><tr>` +
        `<th>id</th><th>owner</th><th>phase</th><th>elements</th><th>succeeded</th><th>shared with</th><th></th>` +
        `</tr></thead><tbody>${body}</tbody></table>`
    );
}

export function renderElementRows(rows: ElementRow[]): string {
    const body = rows
        .map((row) => {
            const stages = row.stageStates
                .map((s) => `<span class="stage stage-${escapeHtml(s.state)}">${escapeHtml(s.stage)}</span>`)
                .join(" ");
            const jobs = row.jobs
                .map(
                    (job) =>
                        `<li class="job job-${job.success ? "ok" : "failed"}">` +
                        `#${job.job} ${escapeHtml(job.activity)} on ${escapeHtml(job.resource)} — ` +
                        `${job.durationMs} ms, ${job.success ? "succeeded" : "failed"}</li>`,
                )
                .join("");
            return (
                `<tr class="element-row state-${escapeHtml(row.resultState)}">` +
                `<td class="mono">${escapeHtml(row.dataElement.slice(0, 8))}</td>` +
                `<td class="result-state">${escapeHtml(row.resultState)}</td>` +
                `<td>${stages}</td>` +
                `<td><ul class="jobs">${jobs}</ul></td>` +
                `</tr>`
            );
        })
        .join("");
    return (
        `<table class="element-table"><thead><tr>` +
        `<th>data element</th><th>state</th><th>stages</th><th>jobs</th>` +
        `</tr></thead><tbody>${body}</tbody></table>`
    );
}

export function renderMonitor(model: MonitorModel): string {
    const actions = model.terminal
        ? `<div class="actions">` +
          `<button id="act-consolidate">Consolidate</button>` +
          `<button id="act-annotate">Annotate</button>` +
          `<button id="act-share">Share</button>` +
          `<button id="act-rerun">Rerun</button>` +
          `</div>`
        : `<p class="running">execution in progress…</p>`;
    const annotations = model.annotations
        .map((a) => `<li><b>${escapeHtml(a.agent)}</b> at ${escapeHtml(a.when)}: ${escapeHtml(a.text)}</li>`)
        .join("");
    return (
        `<div class="monitor">` +
        `<h3>Analysis <span class="mono">${escapeHtml(model.id.slice(0, 8))}</span>` +
        ` — phase <span class="phase phase-${escapeHtml(model.phase)}">${escapeHtml(model.phase)}</span></h3>` +
        `<p class="counts">${model.elements.length} elements, ${model.jobCount} jobs, ` +
        `${model.succeeded} succeeded, ${model.failed} failed</p>` +
        renderElementRows(model.elements) +
        actions +
        `<h4>Annotations</h4><ul class="annotations">${annotations}</ul>` +
        `<div id="prov-panel"></div>` +
        `</div>`
    );
}

export function renderErrorBanner(message: string): string {
    return `<div class="error-banner">${escapeHtml(message)}</div>`;
}
