import { describe, expect, test } from "vitest";

import {
  controlPoint,
  hflowGeometry,
  layerByFlow,
  Point,
  rotateAround,
} from "../src/hflow.js";

const A: Point = [0, 0];
const B: Point = [10, 0];

describe("rotation primitives", () => {
  test("rotateAround quarter turn", () => {
    const [x, y] = rotateAround([1, 0], [0, 0], Math.PI / 2);
    expect(x).toBeCloseTo(0, 12);
    expect(y).toBeCloseTo(1, 12);
  });

  test("control point is the midpoint rotated about the segment start", () => {
    const [x, y] = controlPoint(A, B, 30, 0);
    expect(x).toBeCloseTo(5 * Math.cos(Math.PI / 6), 12);
    expect(y).toBeCloseTo(2.5, 12);
  });

  test("each repeat adds two thirds of the base angle", () => {
    const [x, y] = controlPoint(A, B, 30, 1);
    const fifty = (50 * Math.PI) / 180;
    expect(x).toBeCloseTo(5 * Math.cos(fifty), 12);
    expect(y).toBeCloseTo(5 * Math.sin(fifty), 12);
  });
});

describe("round trips and repeats", () => {
  test("A->B->A bulges to opposite sides and never coincides", () => {
    const shape = hflowGeometry([A, B, A], 10, 10, 0);
    expect(shape.segments).toHaveLength(2);
    const [out, back] = shape.segments;
    expect(out!.control[1]).toBeGreaterThan(0);
    expect(back!.control[1]).toBeLessThan(0);
    expect(out!.control).not.toEqual(back!.control);
    // frozen geometry: same inputs must keep producing these coordinates
    expect(out!.control[0]).toBeCloseTo(4.330127018922194, 12);
    expect(out!.control[1]).toBeCloseTo(2.5, 12);
    expect(back!.control[0]).toBeCloseTo(5.669872981077807, 12);
    expect(back!.control[1]).toBeCloseTo(-2.5, 12);
  });

  test("A->B->A->B rotates the second A->B pass by an extra 2/3 theta", () => {
    const shape = hflowGeometry([A, B, A, B], 10, 10, 0);
    expect(shape.segments).toHaveLength(3);
    const first = shape.segments[0]!;
    const second = shape.segments[2]!;
    expect(first.repeat).toBe(0);
    expect(second.repeat).toBe(1);
    const fifty = (50 * Math.PI) / 180;
    expect(second.control[0]).toBeCloseTo(5 * Math.cos(fifty), 12);
    expect(second.control[1]).toBeCloseTo(5 * Math.sin(fifty), 12);
    expect(second.control).not.toEqual(first.control);
  });

  test("no two segments over the same ordered pair share a control point", () => {
    const shape = hflowGeometry([A, B, A, B, A, B], 5, 10, 0.5);
    const controls = new Set(shape.segments.map((s) => s.control.join(",")));
    expect(controls.size).toBe(shape.segments.length);
  });
});

describe("flow encoding", () => {
  test("width scales with the pattern's share of the max flow", () => {
    const big = hflowGeometry([A, B], 100, 100, 0);
    const small = hflowGeometry([A, B], 10, 100, 0);
    expect(big.segments[0]!.width).toBe(7);
    expect(small.segments[0]!.width).toBeLessThan(big.segments[0]!.width);
    expect(small.segments[0]!.width).toBeGreaterThanOrEqual(1.5);
  });

  test("origin is bold and the terminal node carries the certainty", () => {
    const shape = hflowGeometry([A, B, [20, 5]], 10, 10, 0.25);
    expect(shape.nodes[0]!.bold).toBe(true);
    expect(shape.nodes[0]!.radius).toBeGreaterThan(shape.nodes[1]!.radius);
    expect(shape.nodes.at(-1)!.terminal).toBe(true);
    expect(shape.certainty).toBeCloseTo(0.75, 12);
  });

  test("larger flow layers first so it renders beneath", () => {
    const shapes = [{ flow: 5 }, { flow: 50 }, { flow: 20 }];
    expect(layerByFlow(shapes).map((s) => s.flow)).toEqual([50, 20, 5]);
  });

  test("ties keep input order", () => {
    const a = { flow: 7, tag: "a" };
    const b = { flow: 7, tag: "b" };
    expect(layerByFlow([a, b]).map((s) => s.tag)).toEqual(["a", "b"]);
  });
});

describe("function purity", () => {
  test("identical inputs give identical geometry", () => {
    const once = hflowGeometry([A, B, A], 42, 100, 0.3);
    const twice = hflowGeometry([A, B, A], 42, 100, 0.3);
    expect(twice).toEqual(once);
  });

  test("a single node is rejected", () => {
    expect(() => hflowGeometry([A], 1, 1, 0)).toThrow(/two nodes/);
  });
});
