import { expect, test } from "vitest";

import type { StatsPayload } from "../src/api.js";
import { Store } from "../src/state.js";
import { Tornado, tornadoRows } from "../src/tornado.js";
import statsFixture from "./fixtures/stats_7-10.json";

const ORDER = [
  "Arts & Entertainment",
  "College & University",
  "Food",
  "Great Outdoors",
  "Nightlife Spot",
  "Professional & Other Places",
  "Residence",
  "Shop & Service",
  "Travel & Transport",
];

function stats(partial: Partial<StatsPayload>): StatsPayload {
  return {
    cluster_id: "L1C0000",
    window: "7-10",
    day_type: "weekday",
    sort: "poi",
    category_order: ORDER,
    poi_share: {},
    access_share: {},
    poi_support: 1,
    access_support: 1,
    zero_support: false,
    ...partial,
  };
}

function mount() {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const store = new Store();
  return { store, tornado: new Tornado(root, store) };
}

test("one-hot POI share renders a single full-length bar", () => {
  const { tornado } = mount();
  tornado.render(stats({ poi_share: { Food: 1.0 }, access_share: { Food: 1.0 } }));
  const bars = tornado.container.querySelectorAll<HTMLElement>(".wing.poi .bar");
  expect(bars).toHaveLength(1);
  expect(bars[0]!.style.width).toBe("100.0%");
});

test("sort toggle reorders rows without changing values", () => {
  const { store, tornado } = mount();
  const divergent = stats({
    poi_share: { Food: 0.7, "Travel & Transport": 0.3 },
    access_share: { Food: 0.1, "Travel & Transport": 0.9 },
  });

  const byPoi = tornadoRows(divergent, "poi").map((r) => r.category);
  const byAccess = tornadoRows(divergent, "access").map((r) => r.category);
  expect(byPoi).toEqual(["Food", "Travel & Transport"]);
  expect(byAccess).toEqual(["Travel & Transport", "Food"]);
  expect(new Set(byPoi)).toEqual(new Set(byAccess));

  tornado.render(divergent);
  const widths = () =>
    [...tornado.container.querySelectorAll<HTMLElement>("tr")].map((tr) => [
      tr.dataset.category,
      tr.querySelector<HTMLElement>(".wing.poi .bar")!.style.width,
    ]);
  const before = new Map(widths() as [string, string][]);
  (tornado.container.querySelector(".sort-toggle") as HTMLElement).click();
  expect(store.state.statsSort).toBe("access");
  tornado.render(divergent);
  const after = widths();
  expect(after[0]![0]).toBe("Travel & Transport");
  for (const [cat, width] of after) expect(before.get(cat!)).toBe(width);
});

test("zero support shows the empty-window note", () => {
  const { tornado } = mount();
  tornado.render(stats({ zero_support: true, access_share: {}, poi_share: { Food: 1 } }));
  expect(tornado.container.querySelector(".zero-support")).not.toBeNull();
});

test("captured service payload is one-hot Residence", () => {
  const { tornado } = mount();
  tornado.render(statsFixture as StatsPayload);
  const rows = tornadoRows(statsFixture as StatsPayload, "poi");
  expect(rows).toEqual([{ category: "Residence", poi: 1.0, access: 1.0 }]);
  expect(tornado.container.querySelectorAll("tr")).toHaveLength(1);
});
