import { expect, test } from "vitest";

import type { Pattern, RegionsPayload } from "../src/api.js";
import { bboxOf, MapView, project } from "../src/mapview.js";
import { Store } from "../src/state.js";

import datasetsFixture from "./fixtures/datasets.json";
import globalFixture from "./fixtures/patterns_global_7-10.json";
import regionsFixture from "./fixtures/regions_0-24.json";

const REGIONS = regionsFixture as unknown as RegionsPayload;
const PATTERNS = globalFixture.patterns as unknown as Pattern[];
const CATEGORIES: string[] = datasetsFixture.datasets[0]!.categories;

function mount(options = {}) {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const store = new Store();
  return { view: new MapView(root, store, options), store };
}

test("bbox spans all rings and projection preserves aspect, north up", () => {
  const box = bboxOf(REGIONS.features);
  expect(box.minLon).toBeLessThan(box.maxLon);
  expect(box.minLat).toBeLessThan(box.maxLat);
  const [x0, y0] = project(box.minLon, box.maxLat, box, 640);
  expect(x0).toBe(0);
  expect(y0).toBe(0); // north-west corner maps to the top-left
  const south = project(box.minLon, box.minLat, box, 640);
  expect(south[1]).toBeGreaterThan(0);
  // same scale on both axes: a degree is the same number of pixels either way
  const right = project(box.maxLon, box.maxLat, box, 640);
  const span = Math.max(box.maxLon - box.minLon, box.maxLat - box.minLat);
  expect(right[0]).toBeCloseTo(((box.maxLon - box.minLon) / span) * 640, 9);
});

test("every cluster renders as a clickable path, mixed ones unfilled", () => {
  const { view } = mount();
  view.render(REGIONS, [], CATEGORIES);
  const paths = [...view.svg.querySelectorAll("path.cluster")];
  expect(paths).toHaveLength(33);
  const unfilled = paths.filter((p) => p.getAttribute("fill") === "none");
  expect(unfilled).toHaveLength(3); // no dominant category -> no fill
  const first = paths.find((p) => (p as SVGPathElement).dataset.clusterId === "L1C0000")!;
  expect(first.getAttribute("fill")).toBe("#eeca3b"); // Residence
  expect(first.getAttribute("fill-opacity")).toBe("0.55");
});

test("clicking a region toggles it into the selection", () => {
  const { view, store } = mount();
  view.render(REGIONS, [], CATEGORIES);
  const target = view.svg.querySelector('path.cluster[data-cluster-id="L1C0001"]')!;
  target.dispatchEvent(new MouseEvent("click"));
  expect(store.state.selection).toEqual(["L1C0001"]);
  expect(store.state.statsCluster).toBe("L1C0001");
});

test("selected regions get the heavy outline on re-render", () => {
  const { view, store } = mount();
  store.toggleCluster("L1C0000");
  view.render(REGIONS, [], CATEGORIES);
  const selected = view.svg.querySelector('path.cluster[data-cluster-id="L1C0000"]')!;
  expect(selected.getAttribute("stroke")).toBe("#111");
  expect(selected.getAttribute("stroke-width")).toBe("2.5");
  const other = view.svg.querySelector('path.cluster[data-cluster-id="L1C0001"]')!;
  expect(other.getAttribute("stroke")).toBe("#777");
});

test("one flow overlay per pattern, widest drawn first", () => {
  const { view } = mount();
  const patterns: Pattern[] = [
    { ...PATTERNS[0]!, flow: 40 },
    { ...PATTERNS[1]!, flow: 200 },
  ];
  view.render(REGIONS, patterns, CATEGORIES);
  const groups = [...view.svg.querySelectorAll("g.hflow")];
  expect(groups).toHaveLength(2);
  const widthOf = (g: Element) =>
    Number(g.querySelector("path")!.getAttribute("stroke-width"));
  expect(widthOf(groups[0]!)).toBeGreaterThan(widthOf(groups[1]!));
  // each overlay ends in a certainty dot at the terminal state
  for (const g of groups) {
    expect(g.querySelectorAll("circle.terminal")).toHaveLength(1);
    expect(g.querySelectorAll("circle.origin")).toHaveLength(1);
  }
});

test("tile layer appears beneath the polygons when configured", () => {
  const { view } = mount({ tileUrl: "tiles/base.png" });
  view.render(REGIONS, [], CATEGORIES);
  const first = view.svg.firstElementChild!;
  expect(first.tagName.toLowerCase()).toBe("image");
  expect(first.getAttribute("href")).toBe("tiles/base.png");
});
