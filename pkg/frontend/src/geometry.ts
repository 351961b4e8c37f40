/** World-to-canvas transforms and camera-cone outlines (pure, testable). */

export interface Viewport {
  mapWidth: number; // meters
  mapHeight: number;
  canvasWidth: number; // pixels
  canvasHeight: number;
}

/** Meters (y north) to canvas pixels (y down). */
export function worldToPx(
  x: number,
  y: number,
  vp: Viewport,
): [number, number] {
  return [
    (x / vp.mapWidth) * vp.canvasWidth,
    vp.canvasHeight - (y / vp.mapHeight) * vp.canvasHeight,
  ];
}

/** Grid cell (row, col) center to world meters (resolution m per cell). */
export function cellToWorld(
  row: number,
  col: number,
  resolution: number,
): [number, number] {
  return [(col + 0.5) * resolution, (row + 0.5) * resolution];
}

/**
 * Camera cone outline as a world-space polygon: apex plus an arc of
 * `segments + 1` points spanning the field of view at full range.
 */
export function cameraCone(
  position: [number, number],
  heading: number,
  fov: number,
  range: number,
  segments = 16,
): [number, number][] {
  const pts: [number, number][] = [position];
  for (let i = 0; i <= segments; i++) {
    const theta = heading - fov / 2 + (fov * i) / segments;
    pts.push([
      position[0] + range * Math.cos(theta),
      position[1] + range * Math.sin(theta),
    ]);
  }
  return pts;
}
