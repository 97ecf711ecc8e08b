/**
 * H-Flow geometry: map-space curves for higher-order movement patterns.
 *
 * Every consecutive pair of path nodes becomes a quadratic Bezier whose
 * control point is the segment midpoint rotated about the segment start.
 * The rotation always runs counterclockwise relative to travel direction,
 * so A->B and B->A bulge to opposite sides of the line and a round trip
 * never collapses into one stroke. When the same ordered pair repeats
 * inside one pattern (A->B->A->B), each repeat adds 2/3 of the base angle,
 * keeping the curves apart.
 *
 * Pure functions of (centroids, flow, theta): no DOM, no randomness.
 */

export type Point = readonly [number, number];

export interface HFlowOptions {
  /** base rotation of the control point, degrees */
  thetaDeg?: number;
  minWidth?: number;
  maxWidth?: number;
  nodeRadius?: number;
}

export interface HFlowSegment {
  from: Point;
  to: Point;
  control: Point;
  /** stroke width scaled by this pattern's share of the largest flow */
  width: number;
  /** how many earlier segments of this pattern used the same ordered pair */
  repeat: number;
  pathD: string;
}

export interface HFlowNode {
  at: Point;
  radius: number;
  /** origin marker */
  bold: boolean;
  terminal: boolean;
}

export interface HFlowShape {
  segments: HFlowSegment[];
  nodes: HFlowNode[];
  flow: number;
  /** 1 - entropy rate; drives the terminal node's color saturation */
  certainty: number;
}

const DEFAULTS: Required<HFlowOptions> = {
  thetaDeg: 30,
  minWidth: 1.5,
  maxWidth: 7,
  nodeRadius: 5,
};

export function rotateAround(p: Point, center: Point, radians: number): Point {
  const cos = Math.cos(radians);
  const sin = Math.sin(radians);
  const dx = p[0] - center[0];
  const dy = p[1] - center[1];
  return [center[0] + dx * cos - dy * sin, center[1] + dx * sin + dy * cos];
}

export function controlPoint(from: Point, to: Point, thetaDeg: number, repeat: number): Point {
  const mid: Point = [(from[0] + to[0]) / 2, (from[1] + to[1]) / 2];
  const theta = (thetaDeg + repeat * (2 * thetaDeg) / 3) * (Math.PI / 180);
  return rotateAround(mid, from, theta);
}

export function hflowGeometry(
  centroids: readonly Point[],
  flow: number,
  maxFlow: number,
  entropyRate: number,
  options: HFlowOptions = {},
): HFlowShape {
  if (centroids.length < 2) {
    throw new Error(`H-Flow needs at least two nodes, got ${centroids.length}`);
  }
  const opts = { ...DEFAULTS, ...options };
  const share = maxFlow > 0 ? flow / maxFlow : 0;
  const width = opts.minWidth + (opts.maxWidth - opts.minWidth) * share;

  const seen = new Map<string, number>();
  const segments: HFlowSegment[] = [];
  for (let i = 0; i + 1 < centroids.length; i++) {
    const from = centroids[i]!;
    const to = centroids[i + 1]!;
    const key = `${from[0]},${from[1]}>${to[0]},${to[1]}`;
    const repeat = seen.get(key) ?? 0;
    seen.set(key, repeat + 1);
    const control = controlPoint(from, to, opts.thetaDeg, repeat);
    segments.push({
      from,
      to,
      control,
      width,
      repeat,
      pathD: `M ${from[0]} ${from[1]} Q ${control[0]} ${control[1]} ${to[0]} ${to[1]}`,
    });
  }

  const nodes: HFlowNode[] = centroids.map((at, i) => ({
    at,
    radius: i === 0 ? opts.nodeRadius * 1.6 : opts.nodeRadius,
    bold: i === 0,
    terminal: i === centroids.length - 1,
  }));

  return {
    segments,
    nodes,
    flow,
    certainty: Math.min(1, Math.max(0, 1 - entropyRate)),
  };
}

/**
 * Render order for overlapping patterns: larger flow first, so it ends up on
 * the lower layer and thin routes stay visible at intersections. Ties keep
 * their input order.
 */
export function layerByFlow<T extends { flow: number }>(shapes: readonly T[]): T[] {
  return [...shapes]
    .map((s, i) => [s, i] as const)
    .sort((a, b) => b[0].flow - a[0].flow || a[1] - b[1])
    .map(([s]) => s);
}
