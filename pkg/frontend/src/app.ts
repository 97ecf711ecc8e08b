/**
 * Composition root: builds the dashboard skeleton, wires the views to the
 * store and the sync layer, and exposes the pieces for tests.
 */

import { ApiClient, FetchLike } from "./api.js";
import { MapView } from "./mapview.js";
import { Matrix } from "./matrix.js";
import { SequenceChart } from "./sequence.js";
import { Store } from "./state.js";
import { SnapshotData, ViewSync } from "./sync.js";
import { Timeline } from "./timeline.js";
import { Tornado } from "./tornado.js";

export interface AppConfig {
  baseUrl?: string;
  fetchFn?: FetchLike;
  debounceMs?: number;
  tileUrl?: string | null;
}

export interface App {
  store: Store;
  api: ApiClient;
  sync: ViewSync;
  map: MapView;
  timeline: Timeline;
  matrix: Matrix;
  sequence: SequenceChart;
  tornado: Tornado;
  categories: string[];
  start(): Promise<void>;
}

function panel(root: HTMLElement, cls: string, title: string): HTMLElement {
  const section = document.createElement("section");
  section.className = `panel ${cls}`;
  const heading = document.createElement("h2");
  heading.textContent = title;
  section.appendChild(heading);
  root.appendChild(section);
  return section;
}

export function initApp(root: HTMLElement, config: AppConfig = {}): App {
  const api = new ApiClient(config.baseUrl ?? "/api/v1", config.fetchFn);
  const store = new Store();
  const sync = new ViewSync(api, store, config.debounceMs ?? 120);

  const header = document.createElement("header");
  const daySelect = document.createElement("select");
  daySelect.className = "day-type";
  header.appendChild(daySelect);
  const banner = document.createElement("div");
  banner.className = "banner";
  banner.hidden = true;
  header.appendChild(banner);
  root.appendChild(header);

  const mapPanel = panel(root, "map-panel", "Regions & flows");
  const timelinePanel = panel(root, "timeline-panel", "Timeline");
  const matrixPanel = panel(root, "matrix-panel", "Patterns");
  const sequencePanel = panel(root, "sequence-panel", "State sequences");
  const tornadoPanel = panel(root, "tornado-panel", "Cluster statistics");
  const gridPanel = panel(root, "grid-panel", "History");
  const grid = document.createElement("div");
  grid.className = "grid-entries";
  gridPanel.appendChild(grid);

  const map = new MapView(mapPanel, store, { tileUrl: config.tileUrl ?? null });
  const timeline = new Timeline(timelinePanel, store);
  const matrix = new Matrix(matrixPanel, store);
  const sequence = new SequenceChart(sequencePanel, store);
  const tornado = new Tornado(tornadoPanel, store);

  const app: App = {
    store,
    api,
    sync,
    map,
    timeline,
    matrix,
    sequence,
    tornado,
    categories: [],
    async start() {
      const info = await api.datasets();
      app.categories = info.categories;
      daySelect.replaceChildren(
        ...["all", ...info.day_types].map((d) => {
          const option = document.createElement("option");
          option.value = d;
          option.textContent = d;
          if (d === store.state.dayType) option.selected = true;
          return option;
        }),
      );
      await sync.refresh();
    },
  };

  daySelect.addEventListener("change", () => {
    store.update({ dayType: daySelect.value });
  });

  sync.onData((data: SnapshotData) => {
    banner.hidden = true;
    const patterns = data.local?.patterns ?? data.patterns;
    map.render(data.regions, patterns, app.categories);
    timeline.render(data.timeline, app.categories);
    matrix.render(data.patterns);
    sequence.render(store.state.comparisons);
    tornado.render(data.stats);
  });

  // fetch failures keep the last good layers on screen; only the banner moves
  sync.onError((error) => {
    banner.hidden = false;
    banner.textContent = error instanceof Error ? error.message : String(error);
  });

  store.subscribe((state, changed) => {
    if (changed.has("comparisons")) sequence.render(state.comparisons);
    if (changed.has("grid")) {
      grid.replaceChildren(
        ...state.grid.map((entry) => {
          const card = document.createElement("div");
          card.className = "grid-entry";
          const head = document.createElement("strong");
          head.textContent = `${entry.dayType} ${entry.window}`;
          card.appendChild(head);
          const body = document.createElement("span");
          const top = entry.patterns[0];
          body.textContent =
            ` ${entry.selection.join("+")}` + (top ? ` · ${top.path.join("→")} ×${top.flow}` : "");
          card.appendChild(body);
          return card;
        }),
      );
    }
  });

  return app;
}
