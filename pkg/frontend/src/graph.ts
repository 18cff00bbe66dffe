// Provenance graph rendering: layered layout by node kind, emitted as an
// SVG string so it stays testable without a DOM.

import type { GraphNode, ProvGraphModel } from "./state.js";

const COLUMN_ORDER = ["agent", "analysis", "dataset", "pipeline", "data-element", "job", "outcome"];
const COLUMN_WIDTH = 170;
const ROW_HEIGHT = 46;
const NODE_WIDTH = 140;
const NODE_HEIGHT = 30;
const MARGIN = 20;

const KIND_FILL: Record<string, string> = {
    agent: "#f4d35e",
    analysis: "#ee964b",
    dataset: "#83c5be",
    pipeline: "#b8b8d1",
    "data-element": "#9bc1bc",
    job: "#5f96c5",
    outcome: "#84a59d",
};

interface Placed extends GraphNode {
    x: number;
    y: number;
}

function escapeXml(text: string): string {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}

function shortLabel(node: GraphNode): string {
    const bare = node.label.includes(":") ? node.label.slice(node.label.indexOf(":") + 1) : node.label;
    return bare.length > 14 ? bare.slice(0, 12) + "…" : bare;
}

export function layoutNodes(model: ProvGraphModel): Placed[] {
    const perColumn = new Map<string, number>();
    return model.nodes.map((node) => {
        const column = COLUMN_ORDER.includes(node.kind) ? COLUMN_ORDER.indexOf(node.kind) : COLUMN_ORDER.length;
        const row = perColumn.get(node.kind) ?? 0;
        perColumn.set(node.kind, row + 1);
        return { ...node, x: MARGIN + column * COLUMN_WIDTH, y: MARGIN + row * ROW_HEIGHT };
    });
}

export function renderProvSvg(model: ProvGraphModel): string {
    const placed = layoutNodes(model);
    const byId = new Map(placed.map((node) => [node.id, node]));
    const width = MARGIN * 2 + (COLUMN_ORDER.length + 1) * COLUMN_WIDTH;
    const height = MARGIN * 2 + ROW_HEIGHT * Math.max(1, ...COLUMN_ORDER.map(
        (kind) => placed.filter((node) => node.kind === kind).length,
    ));

    const edges = model.edges
        .map((edge) => {
            const from = byId.get(edge.from);
            const to = byId.get(edge.to);
            if (!from || !to) return "";
            const x1 = from.x + NODE_WIDTH / 2;
            const y1 = from.y + NODE_HEIGHT / 2;
            const x2 = to.x + NODE_WIDTH / 2;
            const y2 = to.y + NODE_HEIGHT / 2;
            return `<line class="edge edge-${edge.kind}" x1="${x1}" y1="${y1}" x2="${x2}" y2="${y2}" ` +
                `stroke="#999" stroke-width="1"><title>${escapeXml(edge.kind)}</title></line>`;
        })
        .join("");

    const nodes = placed
        .map((node) => {
            const fill = KIND_FILL[node.kind] ?? "#dddddd";
            return (
                `<g class="node node-${escapeXml(node.kind)}">` +
                `<rect x="${node.x}" y="${node.y}" width="${NODE_WIDTH}" height="${NODE_HEIGHT}" rx="6" fill="${fill}">` +
                `<title>${escapeXml(node.id)}</title></rect>` +
                `<text x="${node.x + 8}" y="${node.y + 19}" font-size="11">${escapeXml(shortLabel(node))}</text>` +
                `</g>`
            );
        })
        .join("");

    return (
        `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">` +
        edges +
        nodes +
        `</svg>`
    );
}
