/** Client-side renderer for the Mermaid flowchart subset the service
 * emits: a `flowchart TD` header, node declarations `id["label"]`, and
 * edges `a -->|label| b`. Parsing is strict; anything outside the subset
 * throws, and the caller falls back to showing the raw source.
 */

export interface FlowNode {
  id: string;
  label: string;
}

export interface FlowEdge {
  from: string;
  to: string;
  label: string;
}

export interface Flowchart {
  nodes: FlowNode[];
  edges: FlowEdge[];
}

export class MermaidParseError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "MermaidParseError";
  }
}

const HEADER = "flowchart TD";
const NODE_RE = /^\s+([A-Za-z0-9_]+)\["([^"[\]]*)"\]$/;
const EDGE_RE = /^\s+([A-Za-z0-9_]+) -->(?:\|([^|]*)\|)? ([A-Za-z0-9_]+)$/;

// Reverse of the service's escaping; &amp; must unescape last.
const ENTITIES: Array<[string, string]> = [
  ["&#10;", "\n"],
  ["&#124;", "|"],
  ["&#93;", "]"],
  ["&#91;", "["],
  ["&quot;", '"'],
  ["&amp;", "&"],
];

function unescapeLabel(label: string): string {
  let out = label;
  for (const [entity, raw] of ENTITIES) {
    out = out.split(entity).join(raw);
  }
  return out;
}

export function parseFlowchart(source: string): Flowchart {
  const lines = source.split("\n");
  if ((lines[0] ?? "").trim() !== HEADER) {
    throw new MermaidParseError("missing flowchart header");
  }
  const nodes: FlowNode[] = [];
  const edges: FlowEdge[] = [];
  const declared = new Set<string>();
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i];
    if (!line.trim()) continue;
    const nodeMatch = NODE_RE.exec(line);
    if (nodeMatch) {
      if (declared.has(nodeMatch[1])) {
        throw new MermaidParseError(`duplicate node id: ${nodeMatch[1]}`);
      }
      declared.add(nodeMatch[1]);
      nodes.push({ id: nodeMatch[1], label: unescapeLabel(nodeMatch[2]) });
      continue;
    }
    const edgeMatch = EDGE_RE.exec(line);
    if (edgeMatch) {
      edges.push({
        from: edgeMatch[1],
        to: edgeMatch[3],
        label: unescapeLabel(edgeMatch[2] ?? ""),
      });
      continue;
    }
    throw new MermaidParseError(`line ${i + 1} is not node, edge, or whitespace`);
  }
  for (const edge of edges) {
    if (!declared.has(edge.from) || !declared.has(edge.to)) {
      throw new MermaidParseError(`edge endpoint not declared: ${edge.from}->${edge.to}`);
    }
  }
  if (nodes.length === 0) {
    throw new MermaidParseError("graph has no nodes");
  }
  return { nodes, edges };
}

// -- layout and SVG ---------------------------------------------------------

const NODE_W = 180;
const NODE_H = 44;
const GAP_X = 30;
const GAP_Y = 90;
const PAD = 20;

interface Placed extends FlowNode {
  x: number;
  y: number;
}

/** Layer nodes top-down: sources (no incoming edges) first, then their
 * targets, breadth-first; anything unreachable lands on the last row. */
function layout(chart: Flowchart): Placed[] {
  const incoming = new Map<string, number>(chart.nodes.map((n) => [n.id, 0]));
  for (const edge of chart.edges) {
    incoming.set(edge.to, (incoming.get(edge.to) ?? 0) + 1);
  }
  const layerOf = new Map<string, number>();
  let frontier = chart.nodes.filter((n) => (incoming.get(n.id) ?? 0) === 0);
  if (frontier.length === 0) {
    frontier = [chart.nodes[0]];
  }
  let depth = 0;
  while (frontier.length > 0) {
    for (const node of frontier) {
      if (!layerOf.has(node.id)) layerOf.set(node.id, depth);
    }
    const nextIds = new Set<string>();
    for (const edge of chart.edges) {
      if (layerOf.get(edge.from) === depth && !layerOf.has(edge.to)) {
        nextIds.add(edge.to);
      }
    }
    frontier = chart.nodes.filter((n) => nextIds.has(n.id));
    depth += 1;
  }
  const maxLayer = Math.max(0, ...layerOf.values());
  for (const node of chart.nodes) {
    if (!layerOf.has(node.id)) layerOf.set(node.id, maxLayer + 1);
  }

  const byLayer = new Map<number, FlowNode[]>();
  for (const node of chart.nodes) {
    const layer = layerOf.get(node.id) ?? 0;
    const row = byLayer.get(layer) ?? [];
    row.push(node);
    byLayer.set(layer, row);
  }
  const placed: Placed[] = [];
  for (const [layer, row] of byLayer) {
    row.forEach((node, i) => {
      placed.push({
        ...node,
        x: PAD + i * (NODE_W + GAP_X),
        y: PAD + layer * (NODE_H + GAP_Y),
      });
    });
  }
  return placed;
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function clip(text: string, max = 26): string {
  return text.length > max ? `${text.slice(0, max - 1)}…` : text;
}

/** Render the subset source to an SVG string. Throws MermaidParseError on
 * anything outside the subset. */
export function renderFlowchartSVG(source: string): string {
  const chart = parseFlowchart(source);
  const placed = layout(chart);
  const byId = new Map(placed.map((n) => [n.id, n]));
  const width = Math.max(...placed.map((n) => n.x + NODE_W)) + PAD;
  const height = Math.max(...placed.map((n) => n.y + NODE_H)) + PAD;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `class="mermaid-lite" role="img">`,
  );
  for (const edge of chart.edges) {
    const a = byId.get(edge.from)!;
    const b = byId.get(edge.to)!;
    const x1 = a.x + NODE_W / 2;
    const y1 = a.y + NODE_H;
    const x2 = b.x + NODE_W / 2;
    const y2 = b.y;
    parts.push(
      `<line data-edge="${escapeXml(edge.from)}->${escapeXml(edge.to)}" ` +
        `x1="${x1}" y1="${y1}" x2="${x2}" y2="${y2}" stroke="#666"/>`,
    );
    if (edge.label) {
      parts.push(
        `<text class="edge-label" x="${(x1 + x2) / 2}" y="${(y1 + y2) / 2 - 4}" ` +
          `text-anchor="middle">${escapeXml(clip(edge.label, 20))}</text>`,
      );
    }
  }
  for (const node of placed) {
    parts.push(
      `<g class="flow-node" data-node-id="${escapeXml(node.id)}">` +
        `<rect x="${node.x}" y="${node.y}" width="${NODE_W}" height="${NODE_H}" ` +
        `rx="6" fill="#eef2ff" stroke="#4f46e5"/>` +
        `<text x="${node.x + NODE_W / 2}" y="${node.y + NODE_H / 2 + 4}" ` +
        `text-anchor="middle">${escapeXml(clip(node.label))}</text></g>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
