/**
 * Single source of truth for what the analyst is looking at. Views render
 * from this and write back through the mutators; the sync layer watches it
 * and issues the matching API queries.
 */

import type { Pattern } from "./api.js";

export type BinWindow = readonly [number, number];

export const FULL_DAY: BinWindow = [0, 24];
export const GRID_CAPACITY = 4;

export interface GridEntry {
  window: string;
  dayType: string;
  selection: string[];
  patterns: Pattern[];
}

export interface ViewState {
  dayType: string;
  window: BinWindow;
  level: number;
  selection: string[];
  /** patterns stacked in the sequence chart; de-duplicated, unbounded */
  comparisons: Pattern[];
  /** historical selections; newest last, oldest evicted past capacity */
  grid: GridEntry[];
  statsSort: "poi" | "access";
  statsCluster: string | null;
}

export type StateKey = keyof ViewState;
export type Listener = (state: ViewState, changed: ReadonlySet<StateKey>) => void;

export function encodeWindow(window: BinWindow): string {
  return `${window[0]}-${window[1]}`;
}

export function decodeWindow(encoded: string): BinWindow {
  const m = /^(\d{1,2})-(\d{1,2})$/.exec(encoded);
  if (!m) throw new Error(`bad window ${JSON.stringify(encoded)}`);
  const start = Number(m[1]);
  const end = Number(m[2]);
  if (!(start >= 0 && end <= 24 && start < end)) {
    throw new Error(`bad window ${JSON.stringify(encoded)}`);
  }
  return [start, end];
}

export function patternKey(p: Pattern): string {
  return `${p.path.join(">")}@${p.window}`;
}

export class Store {
  private listeners: Listener[] = [];

  state: ViewState = {
    dayType: "weekday",
    window: FULL_DAY,
    level: 1,
    selection: [],
    comparisons: [],
    grid: [],
    statsSort: "poi",
    statsCluster: null,
  };

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(changed: Set<StateKey>): void {
    if (!changed.size) return;
    for (const fn of [...this.listeners]) fn(this.state, changed);
  }

  update(partial: Partial<ViewState>): void {
    const changed = new Set<StateKey>();
    for (const key of Object.keys(partial) as StateKey[]) {
      const next = partial[key];
      if (next !== undefined && this.state[key] !== next) {
        (this.state as Record<StateKey, unknown>)[key] = next;
        changed.add(key);
      }
    }
    this.emit(changed);
  }

  setWindow(window: BinWindow): void {
    const [a, b] = window;
    if (!(a >= 0 && b <= 24 && a < b)) throw new Error(`bad window ${a}-${b}`);
    if (a === this.state.window[0] && b === this.state.window[1]) return;
    this.update({ window: [a, b] });
  }

  clearWindow(): void {
    this.setWindow(FULL_DAY);
  }

  toggleCluster(clusterId: string): void {
    const selection = this.state.selection.includes(clusterId)
      ? this.state.selection.filter((c) => c !== clusterId)
      : [...this.state.selection, clusterId];
    this.update({ selection, statsCluster: clusterId });
  }

  clearSelection(): void {
    if (this.state.selection.length) this.update({ selection: [] });
  }

  addComparison(pattern: Pattern): void {
    const key = patternKey(pattern);
    if (this.state.comparisons.some((p) => patternKey(p) === key)) return;
    this.update({ comparisons: [...this.state.comparisons, pattern] });
  }

  removeComparison(pattern: Pattern): void {
    const key = patternKey(pattern);
    this.update({
      comparisons: this.state.comparisons.filter((p) => patternKey(p) !== key),
    });
  }

  /** Snapshot the current selection into the history grid (capacity-bound). */
  pushGrid(entry: GridEntry): void {
    const grid = [...this.state.grid, entry];
    while (grid.length > GRID_CAPACITY) grid.shift();
    this.update({ grid });
  }
}
