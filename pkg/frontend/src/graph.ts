/** SVG rendering of the automaton graph with live highlights. */

import { layoutGraph, type GraphView, type PlacedEdge } from "./layout.js";
import type { EdgeAnnotation } from "./model.js";
import type { GraphPayload } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const NODE_RADIUS = 26;

export interface GraphHighlights {
  current: string | null;
  lastEdge: string | null;
  annotations: Map<string, EdgeAnnotation>;
}

function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const element = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) element.setAttribute(key, String(value));
  return element;
}

function edgePath(edge: PlacedEdge): string {
  if (edge.from === edge.to) {
    const { x1, y1 } = edge;
    return `M ${x1 - 10} ${y1 - NODE_RADIUS + 4} C ${x1 - 46} ${y1 - 70}, ${x1 + 46} ${y1 - 70}, ${x1 + 10} ${y1 - NODE_RADIUS + 4}`;
  }
  const dx = edge.x2 - edge.x1;
  const dy = edge.y2 - edge.y1;
  const length = Math.hypot(dx, dy) || 1;
  const ux = dx / length;
  const uy = dy / length;
  const startX = edge.x1 + ux * NODE_RADIUS;
  const startY = edge.y1 + uy * NODE_RADIUS;
  const endX = edge.x2 - ux * (NODE_RADIUS + 7);
  const endY = edge.y2 - uy * (NODE_RADIUS + 7);
  const midX = (startX + endX) / 2 - uy * 34 * edge.bend;
  const midY = (startY + endY) / 2 + ux * 34 * edge.bend;
  return `M ${startX} ${startY} Q ${midX} ${midY} ${endX} ${endY}`;
}

/** Render the graph into `container`, replacing any previous rendering. */
export function renderGraph(
  container: HTMLElement,
  graph: GraphPayload,
  highlights: GraphHighlights,
  view: GraphView = layoutGraph(graph),
): GraphView {
  container.textContent = "";
  const svg = svgElement("svg", {
    viewBox: `0 0 ${view.width} ${view.height}`,
    width: "100%",
    class: "graph-svg",
  });
  svg.dataset.automaton = graph.name;

  const defs = svgElement("defs");
  const marker = svgElement("marker", {
    id: "arrow",
    viewBox: "0 0 10 10",
    refX: 9,
    refY: 5,
    markerWidth: 7,
    markerHeight: 7,
    orient: "auto-start-reverse",
  });
  marker.appendChild(svgElement("path", { d: "M 0 0 L 10 5 L 0 10 z", class: "arrow-head" }));
  defs.appendChild(marker);
  svg.appendChild(defs);

  for (const edge of view.edges) {
    const group = svgElement("g", { class: "edge" });
    group.dataset.edge = edge.id;
    const annotation = highlights.annotations.get(edge.id);
    const classes = ["edge-path"];
    if (edge.id === highlights.lastEdge) classes.push("edge-taken");
    if (annotation) classes.push(annotation.fired ? "edge-fired" : "edge-silent");
    group.appendChild(
      svgElement("path", { d: edgePath(edge), class: classes.join(" "), "marker-end": "url(#arrow)" }),
    );
    const labelX = edge.from === edge.to ? edge.x1 : (edge.x1 + edge.x2) / 2 - (edge.y2 - edge.y1) * 0.12 * edge.bend;
    const labelY = edge.from === edge.to ? edge.y1 - 74 : (edge.y1 + edge.y2) / 2 + (edge.x2 - edge.x1) * 0.12 * edge.bend - 6;
    const label = svgElement("text", { x: labelX, y: labelY, class: "edge-label" });
    label.textContent = annotation ? `${edge.label} → ${annotation.value}` : edge.label;
    group.appendChild(label);
    svg.appendChild(group);
  }

  for (const node of view.nodes) {
    const group = svgElement("g", { class: `node node-${node.kind}` });
    group.dataset.node = node.id;
    if (node.id === highlights.current) group.classList.add("node-current");
    group.appendChild(svgElement("circle", { cx: node.x, cy: node.y, r: NODE_RADIUS, class: "node-circle" }));
    if (node.final) {
      group.appendChild(
        svgElement("circle", { cx: node.x, cy: node.y, r: NODE_RADIUS - 5, class: "node-final-ring" }),
      );
    }
    const label = svgElement("text", { x: node.x, y: node.y + 5, class: "node-label" });
    label.textContent = node.id;
    group.appendChild(label);
    const kind = svgElement("text", { x: node.x, y: node.y + NODE_RADIUS + 16, class: "node-kind" });
    kind.textContent = node.kind;
    group.appendChild(kind);
    svg.appendChild(group);
  }

  container.appendChild(svg);
  return view;
}
