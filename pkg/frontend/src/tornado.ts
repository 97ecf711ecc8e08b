/**
 * Dual tornado chart for one cluster: POI-category share on the left wing,
 * windowed access share on the right, one row per category. The sort toggle
 * reorders rows by either wing without touching the values, which makes a
 * Food-heavy block with Transport-heavy traffic jump out.
 */

import type { StatsPayload } from "./api.js";
import { colorFor } from "./palette.js";
import type { Store } from "./state.js";

export interface TornadoRow {
  category: string;
  poi: number;
  access: number;
}

export function tornadoRows(stats: StatsPayload, sort: "poi" | "access"): TornadoRow[] {
  const rows: TornadoRow[] = [];
  for (const category of stats.category_order) {
    const poi = stats.poi_share[category] ?? 0;
    const access = stats.access_share[category] ?? 0;
    if (poi > 0 || access > 0) rows.push({ category, poi, access });
  }
  rows.sort((a, b) => (sort === "poi" ? b.poi - a.poi : b.access - a.access));
  return rows;
}

export class Tornado {
  readonly container: HTMLElement;

  constructor(
    root: HTMLElement,
    private readonly store: Store,
  ) {
    this.container = document.createElement("div");
    this.container.className = "tornado";
    root.appendChild(this.container);
  }

  render(stats: StatsPayload | null): void {
    this.container.replaceChildren();
    if (!stats) return;

    const header = document.createElement("div");
    header.className = "tornado-header";
    const title = document.createElement("span");
    title.textContent = `${stats.cluster_id} · ${stats.window}`;
    header.appendChild(title);

    const toggle = document.createElement("button");
    toggle.className = "sort-toggle";
    toggle.textContent = `sort: ${this.store.state.statsSort}`;
    toggle.addEventListener("click", () => {
      this.store.update({
        statsSort: this.store.state.statsSort === "poi" ? "access" : "poi",
      });
    });
    header.appendChild(toggle);
    this.container.appendChild(header);

    if (stats.zero_support) {
      const note = document.createElement("p");
      note.className = "zero-support";
      note.textContent = "no visits in this window";
      this.container.appendChild(note);
    }

    const rows = tornadoRows(stats, this.store.state.statsSort);
    const table = document.createElement("table");
    table.className = "tornado-rows";
    for (const row of rows) {
      const tr = table.insertRow();
      tr.dataset.category = row.category;

      const left = tr.insertCell();
      left.className = "wing poi";
      const leftBar = document.createElement("div");
      leftBar.className = "bar";
      leftBar.style.width = `${(row.poi * 100).toFixed(1)}%`;
      leftBar.style.backgroundColor = colorFor(row.category, stats.category_order);
      leftBar.dataset.value = row.poi.toFixed(4);
      left.appendChild(leftBar);

      const mid = tr.insertCell();
      mid.className = "category";
      mid.textContent = row.category;

      const right = tr.insertCell();
      right.className = "wing access";
      const rightBar = document.createElement("div");
      rightBar.className = "bar";
      rightBar.style.width = `${(row.access * 100).toFixed(1)}%`;
      rightBar.style.backgroundColor = colorFor(row.category, stats.category_order);
      rightBar.dataset.value = row.access.toFixed(4);
      right.appendChild(rightBar);
    }
    this.container.appendChild(table);
  }
}
