/**
 * Posterior-to-alpha mapping for the canvas overlay.
 *
 * Posterior mass spans many orders of magnitude, so linear alpha hides
 * everything but the peak; alpha is log-scaled over a fixed dynamic range
 * instead, which keeps multimodal structure visible.
 */

import { Heatmap } from "./types.js";

/** Orders of magnitude below the max that still get non-zero alpha. */
export const DYNAMIC_RANGE_DECADES = 4;

/**
 * Maps one cell's mass to [0, 1] alpha: 1 at the grid max, falling
 * logarithmically to 0 at max/10^DYNAMIC_RANGE_DECADES, 0 for empty cells.
 */
export function logAlpha(value: number, max: number): number {
  if (value <= 0 || max <= 0) return 0;
  const decadesBelow = Math.log10(max / value);
  return Math.max(0, 1 - decadesBelow / DYNAMIC_RANGE_DECADES);
}

export function heatmapMax(hm: Heatmap): number {
  let max = 0;
  for (const row of hm.values) {
    for (const v of row) {
      if (v > max) max = v;
    }
  }
  return max;
}

/** True when every occupied-able cell carries the same mass (flat prior). */
export function isFlat(hm: Heatmap, relTol = 1e-9): boolean {
  let max = 0;
  let minPositive = Infinity;
  for (const row of hm.values) {
    for (const v of row) {
      if (v <= 0) continue;
      if (v > max) max = v;
      if (v < minPositive) minPositive = v;
    }
  }
  return max === 0 || (max - minPositive) / max <= relTol;
}
