/**
 * Controlled timeline: 24 hourly bars with a drag brush that sets the
 * analysis window. Without a selection it shows total departures per bin;
 * with one, bi-directional bars split arrivals into the selection (up) from
 * departures out of it (down). A click without a drag clears the brush back
 * to the full day.
 */

import type { TimelineBin, TimelinePayload } from "./api.js";
import { colorFor } from "./palette.js";
import { BinWindow, Store } from "./state.js";

const SVGNS = "http://www.w3.org/2000/svg";
export const BINS = 24;

export interface TimelineLayout {
  width: number;
  height: number;
  padX: number;
}

const LAYOUT: TimelineLayout = { width: 720, height: 120, padX: 20 };

export function binAtX(x: number, layout: TimelineLayout = LAYOUT): number {
  const inner = layout.width - 2 * layout.padX;
  const bin = Math.floor(((x - layout.padX) / inner) * BINS);
  return Math.min(BINS - 1, Math.max(0, bin));
}

function dominantOf(bin: TimelineBin): string | null {
  let best: string | null = null;
  let most = 0;
  for (const [cat, n] of Object.entries(bin.by_category)) {
    if (n > most) {
      most = n;
      best = cat;
    }
  }
  return best;
}

export class Timeline {
  readonly svg: SVGSVGElement;
  private brushStart: number | null = null;
  private dragged = false;
  private payload: TimelinePayload | null = null;
  private categories: string[] = [];

  constructor(
    private readonly root: HTMLElement,
    private readonly store: Store,
    private readonly layout: TimelineLayout = LAYOUT,
  ) {
    this.svg = document.createElementNS(SVGNS, "svg");
    this.svg.setAttribute("class", "timeline");
    this.svg.setAttribute("viewBox", `0 0 ${layout.width} ${layout.height}`);
    this.svg.addEventListener("pointerdown", (e) => this.onDown(e as PointerEvent));
    this.svg.addEventListener("pointermove", (e) => this.onMove(e as PointerEvent));
    this.svg.addEventListener("pointerup", (e) => this.onUp(e as PointerEvent));
    root.appendChild(this.svg);
    store.subscribe((_, changed) => {
      if (changed.has("window")) this.draw();
    });
  }

  render(payload: TimelinePayload, categories: string[]): void {
    this.payload = payload;
    this.categories = categories;
    this.draw();
  }

  private localX(e: PointerEvent): number {
    const rect = this.svg.getBoundingClientRect();
    const scale = rect.width > 0 ? this.layout.width / rect.width : 1;
    return (e.clientX - rect.left) * scale;
  }

  private onDown(e: PointerEvent): void {
    this.brushStart = binAtX(this.localX(e), this.layout);
    this.dragged = false;
  }

  private onMove(e: PointerEvent): void {
    if (this.brushStart === null) return;
    const bin = binAtX(this.localX(e), this.layout);
    if (bin !== this.brushStart) this.dragged = true;
  }

  private onUp(e: PointerEvent): void {
    if (this.brushStart === null) return;
    const end = binAtX(this.localX(e), this.layout);
    const start = this.brushStart;
    this.brushStart = null;
    if (!this.dragged && end === start) {
      this.store.clearWindow();
      return;
    }
    const window: BinWindow = [Math.min(start, end), Math.max(start, end) + 1];
    this.store.setWindow(window);
  }

  private draw(): void {
    const { width, height, padX } = this.layout;
    this.svg.replaceChildren();
    const payload = this.payload;
    if (!payload) return;

    const inner = width - 2 * padX;
    const barW = inner / BINS;
    const axisY = payload.in ? height / 2 : height - 18;
    const maxOf = (bins?: TimelineBin[]) =>
      Math.max(1, ...(bins ?? []).map((b) => b.total));

    const bar = (bin: TimelineBin, up: boolean, scale: number, cls: string) => {
      const h = (bin.total / scale) * (payload.in ? height / 2 - 14 : height - 32);
      const rect = document.createElementNS(SVGNS, "rect");
      rect.setAttribute("class", cls);
      rect.setAttribute("x", String(padX + bin.bin * barW + 1));
      rect.setAttribute("width", String(Math.max(1, barW - 2)));
      rect.setAttribute("y", String(up ? axisY - h : axisY));
      rect.setAttribute("height", String(Math.max(0, h)));
      rect.setAttribute("fill", colorFor(dominantOf(bin), this.categories) || "#888");
      this.svg.appendChild(rect);
    };

    if (payload.in && payload.out) {
      const scale = Math.max(maxOf(payload.in), maxOf(payload.out));
      for (const b of payload.in) if (b.total) bar(b, true, scale, "bar-in");
      for (const b of payload.out) if (b.total) bar(b, false, scale, "bar-out");
    } else {
      const scale = maxOf(payload.bins);
      for (const b of payload.bins ?? []) if (b.total) bar(b, true, scale, "bar");
    }

    const axis = document.createElementNS(SVGNS, "line");
    axis.setAttribute("class", "axis");
    axis.setAttribute("x1", String(padX));
    axis.setAttribute("x2", String(width - padX));
    axis.setAttribute("y1", String(axisY));
    axis.setAttribute("y2", String(axisY));
    axis.setAttribute("stroke", "#444");
    this.svg.appendChild(axis);

    for (let h = 0; h <= 24; h += 6) {
      const label = document.createElementNS(SVGNS, "text");
      label.setAttribute("class", "tick");
      label.setAttribute("x", String(padX + (h / 24) * inner));
      label.setAttribute("y", String(height - 4));
      label.setAttribute("font-size", "9");
      label.setAttribute("text-anchor", "middle");
      label.textContent = `${String(h).padStart(2, "0")}:00`;
      this.svg.appendChild(label);
    }

    const [a, b] = this.store.state.window;
    if (!(a === 0 && b === 24)) {
      const brush = document.createElementNS(SVGNS, "rect");
      brush.setAttribute("class", "brush");
      brush.setAttribute("x", String(padX + (a / 24) * inner));
      brush.setAttribute("width", String(((b - a) / 24) * inner));
      brush.setAttribute("y", "2");
      brush.setAttribute("height", String(height - 20));
      brush.setAttribute("fill", "rgba(70,110,180,0.18)");
      brush.setAttribute("stroke", "#46649c");
      this.svg.appendChild(brush);
    }
  }
}
