/**
 * Bridges ViewState changes to API traffic: one debounced round of queries
 * per change burst, and an in-flight round is aborted when a newer change
 * supersedes it. Views subscribe to the typed results, not to fetch.
 */

import { ApiClient, LocalPatternsPayload, Pattern, RegionsPayload, StatsPayload, TimelinePayload } from "./api.js";
import { encodeWindow, StateKey, Store, ViewState } from "./state.js";

export interface SnapshotData {
  regions: RegionsPayload;
  patterns: Pattern[];
  timeline: TimelinePayload;
  local: LocalPatternsPayload | null;
  stats: StatsPayload | null;
}

export type DataListener = (data: SnapshotData, state: ViewState) => void;
export type ErrorListener = (error: unknown) => void;

const WINDOW_KEYS: StateKey[] = ["window", "dayType", "level"];
const SELECTION_KEYS: StateKey[] = ["selection", "statsSort", "statsCluster"];

export class ViewSync {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private controller: AbortController | null = null;
  private dataListeners: DataListener[] = [];
  private errorListeners: ErrorListener[] = [];
  private last: SnapshotData | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly store: Store,
    private readonly debounceMs = 120,
  ) {
    store.subscribe((state, changed) => {
      const windowChanged = WINDOW_KEYS.some((k) => changed.has(k));
      const selectionChanged = SELECTION_KEYS.some((k) => changed.has(k));
      if (!windowChanged && !selectionChanged) return;
      if (windowChanged && state.selection.length && this.last) {
        // keep the outgoing view reachable: selections survive window hops
        // in the history grid
        store.pushGrid({
          window: this.last.regions.meta.window,
          dayType: this.last.regions.meta.day_type,
          selection: [...state.selection],
          patterns: this.last.local?.patterns ?? [],
        });
      }
      this.schedule();
    });
  }

  onData(fn: DataListener): () => void {
    this.dataListeners.push(fn);
    return () => {
      this.dataListeners = this.dataListeners.filter((l) => l !== fn);
    };
  }

  onError(fn: ErrorListener): void {
    this.errorListeners.push(fn);
  }

  /** Debounce: a burst of state changes issues one round of queries. */
  private schedule(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.refresh();
    }, this.debounceMs);
  }

  async refresh(): Promise<void> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const { signal } = controller;
    const state = this.store.state;
    const window = encodeWindow(state.window);

    try {
      const [regions, global, timeline] = await Promise.all([
        this.api.regions(window, state.dayType, state.level, signal),
        this.api.globalPatterns(window, state.dayType, state.level, 12, signal),
        this.api.timeline(state.dayType, state.selection, signal),
      ]);
      let local: LocalPatternsPayload | null = null;
      let stats: StatsPayload | null = null;
      if (state.selection.length) {
        local = await this.api.localPatterns(state.selection, window, state.dayType, signal);
      }
      if (state.statsCluster) {
        stats = await this.api.stats(
          state.statsCluster,
          window,
          state.dayType,
          state.statsSort,
          signal,
        );
      }
      if (signal.aborted) return;
      const data: SnapshotData = { regions, patterns: global.patterns, timeline, local, stats };
      this.last = data;
      for (const fn of this.dataListeners) fn(data, state);
    } catch (error) {
      if (signal.aborted) return; // superseded, newer round owns the views
      for (const fn of this.errorListeners) fn(error);
    }
  }
}
