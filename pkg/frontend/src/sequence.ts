/**
 * Higher-order state sequence charts: one horizontal chain per compared
 * pattern, aligned on a shared 24h axis. Nodes are circular glyphs (origin
 * bold, terminal carries the certainty dot); each edge is a rectangle whose
 * height tracks the flow and whose fill is a per-bin departure heatmap.
 */

import type { Pattern } from "./api.js";
import { certaintyColor, heatColor } from "./palette.js";
import type { Store } from "./state.js";
import { patternKey } from "./state.js";

const SVGNS = "http://www.w3.org/2000/svg";

const CHART_W = 680;
const ROW_H = 74;
const PAD_X = 56;
const NODE_R = 11;

export class SequenceChart {
  readonly container: HTMLElement;

  constructor(
    root: HTMLElement,
    private readonly store: Store,
    private readonly onHoverCluster: (clusterId: string | null) => void = () => {},
  ) {
    this.container = document.createElement("div");
    this.container.className = "sequence";
    root.appendChild(this.container);
  }

  render(comparisons: Pattern[]): void {
    this.container.replaceChildren();
    if (!comparisons.length) {
      const empty = document.createElement("p");
      empty.className = "placeholder";
      empty.textContent = "click a matrix row to inspect a pattern";
      this.container.appendChild(empty);
      return;
    }

    const maxFlow = Math.max(1, ...comparisons.map((p) => p.flow));
    const height = comparisons.length * ROW_H + 26;
    const svg = document.createElementNS(SVGNS, "svg");
    svg.setAttribute("class", "sequence-chart");
    svg.setAttribute("viewBox", `0 0 ${CHART_W} ${height}`);

    comparisons.forEach((pattern, row) => {
      svg.appendChild(this.renderRow(pattern, row, maxFlow));
    });

    // shared time axis under the stack
    const innerW = CHART_W - 2 * PAD_X;
    const axisY = comparisons.length * ROW_H + 8;
    for (let h = 0; h <= 24; h += 6) {
      const tick = document.createElementNS(SVGNS, "text");
      tick.setAttribute("class", "tick");
      tick.setAttribute("x", String(PAD_X + (h / 24) * innerW));
      tick.setAttribute("y", String(axisY + 10));
      tick.setAttribute("font-size", "9");
      tick.setAttribute("text-anchor", "middle");
      tick.textContent = `${String(h).padStart(2, "0")}:00`;
      svg.appendChild(tick);
    }

    this.container.appendChild(svg);
  }

  private renderRow(pattern: Pattern, row: number, maxFlow: number): SVGGElement {
    const group = document.createElementNS(SVGNS, "g");
    group.setAttribute("class", "sequence-row");
    group.dataset.key = patternKey(pattern);
    const yMid = row * ROW_H + ROW_H / 2;
    const innerW = CHART_W - 2 * PAD_X;
    const n = pattern.path.length;
    const xAt = (i: number) => PAD_X + (n === 1 ? 0 : (i / (n - 1)) * innerW);

    // edges first so node glyphs sit on top
    pattern.edge_bins.forEach((bins, i) => {
      const x0 = xAt(i) + NODE_R;
      const x1 = xAt(i + 1) - NODE_R;
      const w = Math.max(1, x1 - x0);
      const h = 8 + 16 * (pattern.flow / maxFlow);
      const top = Math.max(1, ...bins);
      const edge = document.createElementNS(SVGNS, "g");
      edge.setAttribute("class", "edge");
      bins.forEach((count, bin) => {
        if (!count) return;
        const cell = document.createElementNS(SVGNS, "rect");
        cell.setAttribute("class", "edge-bin");
        cell.dataset.bin = String(bin);
        cell.setAttribute("x", String(x0 + (bin / 24) * w));
        cell.setAttribute("y", String(yMid - h / 2));
        cell.setAttribute("width", String(w / 24));
        cell.setAttribute("height", String(h));
        cell.setAttribute("fill", heatColor(count / top));
        edge.appendChild(cell);
      });
      const frame = document.createElementNS(SVGNS, "rect");
      frame.setAttribute("x", String(x0));
      frame.setAttribute("y", String(yMid - h / 2));
      frame.setAttribute("width", String(w));
      frame.setAttribute("height", String(h));
      frame.setAttribute("fill", "none");
      frame.setAttribute("stroke", "#999");
      edge.appendChild(frame);
      group.appendChild(edge);
    });

    pattern.path.forEach((clusterId, i) => {
      const node = document.createElementNS(SVGNS, "circle");
      node.setAttribute("class", "state");
      node.dataset.clusterId = clusterId;
      node.setAttribute("cx", String(xAt(i)));
      node.setAttribute("cy", String(yMid));
      node.setAttribute("r", String(NODE_R));
      node.setAttribute("fill", "#f5f5f5");
      node.setAttribute("stroke", "#2b3a67");
      node.setAttribute("stroke-width", i === 0 ? "3.5" : "1.5");
      node.addEventListener("pointerenter", () => this.onHoverCluster(clusterId));
      node.addEventListener("pointerleave", () => this.onHoverCluster(null));
      group.appendChild(node);

      const label = document.createElementNS(SVGNS, "text");
      label.setAttribute("x", String(xAt(i)));
      label.setAttribute("y", String(yMid - NODE_R - 4));
      label.setAttribute("font-size", "8");
      label.setAttribute("text-anchor", "middle");
      label.textContent = clusterId;
      group.appendChild(label);

      if (i === pattern.path.length - 1) {
        const dot = document.createElementNS(SVGNS, "circle");
        dot.setAttribute("class", "terminal");
        dot.setAttribute("cx", String(xAt(i)));
        dot.setAttribute("cy", String(yMid));
        dot.setAttribute("r", String(NODE_R * 0.5));
        dot.setAttribute("fill", certaintyColor(pattern.entropy_rate));
        group.appendChild(dot);
      }
    });

    return group;
  }
}
