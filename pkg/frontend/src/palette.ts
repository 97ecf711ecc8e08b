/**
 * Fixed categorical palette, keyed by taxonomy order (nine categories).
 * Clusters without a dominant category render unfilled.
 */

export const CATEGORY_COLORS: readonly string[] = [
  "#e45756", // Arts & Entertainment
  "#f58518", // College & University
  "#54a24b", // Food
  "#72b7b2", // Great Outdoors
  "#b279a2", // Nightlife Spot
  "#4c78a8", // Professional & Other Places
  "#eeca3b", // Residence
  "#ff9da6", // Shop & Service
  "#9d755d", // Travel & Transport
];

export const UNFILLED = "none";

export function colorFor(
  category: string | null | undefined,
  categories: readonly string[],
): string {
  if (!category) return UNFILLED;
  const i = categories.indexOf(category);
  if (i < 0 || i >= CATEGORY_COLORS.length) return UNFILLED;
  return CATEGORY_COLORS[i]!;
}

/**
 * Terminal-node fill: saturation carries the certainty of the whole pattern
 * (1 - entropy rate), so a fully determined path shows saturated color and a
 * coin-flip path washes out to grey.
 */
export function certaintyColor(entropyRate: number): string {
  const certainty = Math.min(1, Math.max(0, 1 - entropyRate));
  return `hsl(259, ${Math.round(certainty * 100)}%, 55%)`;
}

/** Heatmap cell shade: 0 -> transparent, 1 -> deep blue. */
export function heatColor(t: number): string {
  const clamped = Math.min(1, Math.max(0, t));
  return `rgba(46, 92, 158, ${clamped.toFixed(3)})`;
}
