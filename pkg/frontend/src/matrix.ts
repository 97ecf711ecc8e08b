/**
 * Temporal distribution matrix: one row per global pattern (flow-descending),
 * a 24-column heatmap of departure bins pooled across the pattern's edges.
 * Clicking a row stacks the pattern into the sequence chart comparison.
 */

import type { Pattern } from "./api.js";
import { heatColor } from "./palette.js";
import type { Store } from "./state.js";
import { patternKey } from "./state.js";

export function pooledBins(pattern: Pattern, bins = 24): number[] {
  const pooled = new Array<number>(bins).fill(0);
  for (const edge of pattern.edge_bins) {
    edge.forEach((n, i) => {
      if (i < bins) pooled[i]! += n;
    });
  }
  return pooled;
}

export class Matrix {
  readonly table: HTMLTableElement;

  constructor(
    root: HTMLElement,
    private readonly store: Store,
  ) {
    this.table = document.createElement("table");
    this.table.className = "matrix";
    root.appendChild(this.table);
  }

  render(patterns: Pattern[]): void {
    this.table.replaceChildren();
    if (!patterns.length) {
      const row = this.table.insertRow();
      row.className = "placeholder";
      const cell = row.insertCell();
      cell.colSpan = 26;
      cell.textContent = "no patterns in this window";
      return;
    }

    const ordered = [...patterns].sort((a, b) => b.flow - a.flow);
    for (const pattern of ordered) {
      const row = this.table.insertRow();
      row.className = "pattern-row";
      row.dataset.key = patternKey(pattern);
      row.addEventListener("click", () => this.store.addComparison(pattern));

      const label = row.insertCell();
      label.className = "label";
      label.textContent = pattern.path.join(" → ");

      const flow = row.insertCell();
      flow.className = "flow";
      flow.textContent = String(pattern.flow);

      const pooled = pooledBins(pattern);
      const top = Math.max(1, ...pooled);
      pooled.forEach((n, bin) => {
        const cell = row.insertCell();
        cell.className = "bin";
        cell.dataset.bin = String(bin);
        cell.style.backgroundColor = n ? heatColor(n / top) : "transparent";
        if (n) cell.dataset.count = String(n);
      });
    }
  }
}
