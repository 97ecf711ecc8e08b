/**
 * Cluster map: region polygons filled by dominant category, click-to-select,
 * and H-Flow curves layered on top for the active patterns. Everything is
 * plain SVG; a tile URL can be configured for a background image layer.
 */

import type { ClusterFeature, Pattern, RegionsPayload } from "./api.js";
import { hflowGeometry, layerByFlow, Point } from "./hflow.js";
import { certaintyColor, colorFor, UNFILLED } from "./palette.js";
import type { Store } from "./state.js";

const SVGNS = "http://www.w3.org/2000/svg";

export interface Bbox {
  minLon: number;
  minLat: number;
  maxLon: number;
  maxLat: number;
}

type Ring = [number, number][];

function ringsOf(feature: ClusterFeature): Ring[] {
  const geom = feature.geometry;
  if (geom.type === "Polygon") {
    return geom.coordinates as Ring[];
  }
  return (geom.coordinates as Ring[][]).flat();
}

export function bboxOf(features: ClusterFeature[]): Bbox {
  const box: Bbox = { minLon: Infinity, minLat: Infinity, maxLon: -Infinity, maxLat: -Infinity };
  for (const f of features) {
    for (const ring of ringsOf(f)) {
      for (const [lon, lat] of ring) {
        box.minLon = Math.min(box.minLon, lon);
        box.maxLon = Math.max(box.maxLon, lon);
        box.minLat = Math.min(box.minLat, lat);
        box.maxLat = Math.max(box.maxLat, lat);
      }
    }
  }
  return box;
}

/** Equirectangular fit into a sized viewport, north up. */
export function project(lon: number, lat: number, box: Bbox, size: number): Point {
  const spanLon = box.maxLon - box.minLon || 1;
  const spanLat = box.maxLat - box.minLat || 1;
  const span = Math.max(spanLon, spanLat);
  return [
    ((lon - box.minLon) / span) * size,
    ((box.maxLat - lat) / span) * size,
  ];
}

export interface MapOptions {
  size?: number;
  tileUrl?: string | null;
  showBoundaries?: boolean;
}

export class MapView {
  readonly svg: SVGSVGElement;
  private readonly size: number;
  private tileUrl: string | null;
  showBoundaries: boolean;

  constructor(
    root: HTMLElement,
    private readonly store: Store,
    options: MapOptions = {},
  ) {
    this.size = options.size ?? 640;
    this.tileUrl = options.tileUrl ?? null;
    this.showBoundaries = options.showBoundaries ?? true;
    this.svg = document.createElementNS(SVGNS, "svg");
    this.svg.setAttribute("class", "mapview");
    this.svg.setAttribute("viewBox", `0 0 ${this.size} ${this.size}`);
    root.appendChild(this.svg);
  }

  render(regions: RegionsPayload, patterns: Pattern[], categories: string[]): void {
    this.svg.replaceChildren();
    const box = bboxOf(regions.features);

    if (this.tileUrl) {
      const tile = document.createElementNS(SVGNS, "image");
      tile.setAttribute("href", this.tileUrl);
      tile.setAttribute("width", String(this.size));
      tile.setAttribute("height", String(this.size));
      tile.setAttribute("opacity", "0.35");
      this.svg.appendChild(tile);
    }

    const selected = new Set(this.store.state.selection);
    for (const feature of regions.features) {
      const props = feature.properties;
      const path = document.createElementNS(SVGNS, "path");
      const d = ringsOf(feature)
        .map((ring) =>
          ring
            .map(([lon, lat], i) => {
              const [x, y] = project(lon, lat, box, this.size);
              return `${i ? "L" : "M"} ${x.toFixed(2)} ${y.toFixed(2)}`;
            })
            .join(" ") + " Z",
        )
        .join(" ");
      path.setAttribute("d", d);
      path.setAttribute("class", "cluster");
      path.dataset.clusterId = props.cluster_id;
      const fill = colorFor(props.dominant_category, categories);
      path.setAttribute("fill", fill);
      if (fill !== UNFILLED) path.setAttribute("fill-opacity", "0.55");
      path.setAttribute(
        "stroke",
        selected.has(props.cluster_id) ? "#111" : this.showBoundaries ? "#777" : "none",
      );
      path.setAttribute("stroke-width", selected.has(props.cluster_id) ? "2.5" : "0.7");
      path.addEventListener("click", () => this.store.toggleCluster(props.cluster_id));
      this.svg.appendChild(path);
    }

    this.drawFlows(patterns, box);
  }

  private drawFlows(patterns: Pattern[], box: Bbox): void {
    const maxFlow = Math.max(1, ...patterns.map((p) => p.flow));
    const shapes = patterns.map((p) => ({
      flow: p.flow,
      shape: hflowGeometry(
        p.centroids.map(([lon, lat]) => project(lon, lat, box, this.size)),
        p.flow,
        maxFlow,
        p.entropy_rate,
      ),
    }));

    // larger flows first, so they sit beneath at junctions
    for (const { shape } of layerByFlow(shapes)) {
      const group = document.createElementNS(SVGNS, "g");
      group.setAttribute("class", "hflow");
      for (const seg of shape.segments) {
        const curve = document.createElementNS(SVGNS, "path");
        curve.setAttribute("d", seg.pathD);
        curve.setAttribute("fill", "none");
        curve.setAttribute("stroke", "#2b3a67");
        curve.setAttribute("stroke-opacity", "0.8");
        curve.setAttribute("stroke-width", seg.width.toFixed(2));
        group.appendChild(curve);
      }
      for (const node of shape.nodes) {
        const dot = document.createElementNS(SVGNS, "circle");
        dot.setAttribute("cx", String(node.at[0]));
        dot.setAttribute("cy", String(node.at[1]));
        dot.setAttribute("r", String(node.radius));
        dot.setAttribute("fill", "#fff");
        dot.setAttribute("stroke", "#2b3a67");
        dot.setAttribute("stroke-width", node.bold ? "3.5" : "1.5");
        if (node.bold) dot.setAttribute("class", "origin");
        group.appendChild(dot);
        if (node.terminal) {
          const inner = document.createElementNS(SVGNS, "circle");
          inner.setAttribute("class", "terminal");
          inner.setAttribute("cx", String(node.at[0]));
          inner.setAttribute("cy", String(node.at[1]));
          inner.setAttribute("r", String(node.radius * 0.55));
          inner.setAttribute("fill", certaintyColor(1 - shape.certainty));
          group.appendChild(inner);
        }
      }
      this.svg.appendChild(group);
    }
  }
}
