/** Canvas rendering for the operator console.
 *
 * Everything here draws from a SessionState snapshot plus the viewport
 * transform; no network or mutable module state.  The heatmap overlay uses
 * log-scaled alpha so low-probability structure stays visible next to a
 * sharp posterior peak.
 */

import { cameraCone, cellToWorld, Viewport, worldToPx } from "./geometry.js";
import { heatmapMax, isFlat, logAlpha } from "./heatmap.js";
import { CameraDoc, Heatmap, SessionState } from "./types.js";

const COLORS = {
  background: "#10141a",
  building: "#3a4354",
  buildingEdge: "#5a6887",
  label: "#c7d0e0",
  heat: [215, 88, 48] as const, // warm orange, alpha carries the value
  robot: "#4fc3f7",
  plan: "rgba(79, 195, 247, 0.55)",
  camera: "rgba(255, 235, 120, 0.14)",
  cameraEdge: "rgba(255, 235, 120, 0.5)",
  target: "#ff5370",
  mapCell: "#9ef79e",
};

export function makeViewport(
  state: SessionState,
  canvasWidth: number,
  canvasHeight: number,
): Viewport {
  return {
    mapWidth: state.map.width,
    mapHeight: state.map.height,
    canvasWidth,
    canvasHeight,
  };
}

/** "b4" -> "Building 4"; anything else is shown verbatim. */
export function labelFor(id: string): string {
  const m = /^b(\d+)$/.exec(id);
  return m ? `Building ${m[1]}` : id;
}

export function drawMap(
  ctx: CanvasRenderingContext2D,
  state: SessionState,
  vp: Viewport,
): void {
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, vp.canvasWidth, vp.canvasHeight);

  for (const lm of state.map.landmarks) {
    ctx.beginPath();
    lm.polygon.forEach(([x, y], i) => {
      const [px, py] = worldToPx(x, y, vp);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.closePath();
    ctx.fillStyle = COLORS.building;
    ctx.fill();
    ctx.strokeStyle = COLORS.buildingEdge;
    ctx.stroke();

    const cx = lm.polygon.reduce((s, p) => s + p[0], 0) / lm.polygon.length;
    const cy = lm.polygon.reduce((s, p) => s + p[1], 0) / lm.polygon.length;
    const [lx, ly] = worldToPx(cx, cy, vp);
    ctx.fillStyle = COLORS.label;
    ctx.font = "12px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(labelFor(lm.id), lx, ly);
  }
}

export function drawHeatmap(
  ctx: CanvasRenderingContext2D,
  hm: Heatmap,
  resolution: number,
  vp: Viewport,
): void {
  // A flat posterior carries no information worth tinting the map with.
  if (isFlat(hm)) return;
  const max = heatmapMax(hm);
  const blockMeters = hm.factor * resolution;
  const blockW = (blockMeters / vp.mapWidth) * vp.canvasWidth;
  const blockH = (blockMeters / vp.mapHeight) * vp.canvasHeight;
  const [r, g, b] = COLORS.heat;
  for (let row = 0; row < hm.rows; row++) {
    for (let col = 0; col < hm.cols; col++) {
      const a = logAlpha(hm.values[row][col], max);
      if (a <= 0) continue;
      // The y flip means the block's top-left pixel corner corresponds
      // to its north-west corner in world coordinates.
      const [px, py] = worldToPx(
        col * blockMeters,
        (row + 1) * blockMeters,
        vp,
      );
      ctx.fillStyle = `rgba(${r}, ${g}, ${b}, ${(0.85 * a).toFixed(3)})`;
      ctx.fillRect(px, py, blockW, blockH);
    }
  }
}

export function drawCameras(
  ctx: CanvasRenderingContext2D,
  cameras: CameraDoc[],
  vp: Viewport,
): void {
  for (const cam of cameras) {
    const cone = cameraCone(cam.position, cam.heading, cam.fov, cam.range);
    ctx.beginPath();
    cone.forEach(([x, y], i) => {
      const [px, py] = worldToPx(x, y, vp);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.closePath();
    ctx.fillStyle = COLORS.camera;
    ctx.fill();
    ctx.strokeStyle = COLORS.cameraEdge;
    ctx.stroke();
  }
}

export function drawRobot(
  ctx: CanvasRenderingContext2D,
  state: SessionState,
  vp: Viewport,
): void {
  const res = state.grid.resolution;
  if (state.plan.length > 1) {
    ctx.beginPath();
    state.plan.forEach(([row, col], i) => {
      const [wx, wy] = cellToWorld(row, col, res);
      const [px, py] = worldToPx(wx, wy, vp);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.strokeStyle = COLORS.plan;
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.lineWidth = 1;
  }

  const [wx, wy] = cellToWorld(state.robot[0], state.robot[1], res);
  const [rx, ry] = worldToPx(wx, wy, vp);
  ctx.beginPath();
  ctx.arc(rx, ry, 6, 0, 2 * Math.PI);
  ctx.fillStyle = COLORS.robot;
  ctx.fill();
}

export function drawMapCell(
  ctx: CanvasRenderingContext2D,
  state: SessionState,
  vp: Viewport,
): void {
  const [wx, wy] = cellToWorld(
    state.map_cell[0],
    state.map_cell[1],
    state.grid.resolution,
  );
  const [mx, my] = worldToPx(wx, wy, vp);
  ctx.beginPath();
  ctx.moveTo(mx - 5, my);
  ctx.lineTo(mx + 5, my);
  ctx.moveTo(mx, my - 5);
  ctx.lineTo(mx, my + 5);
  ctx.strokeStyle = COLORS.mapCell;
  ctx.stroke();
}

export function drawTarget(
  ctx: CanvasRenderingContext2D,
  state: SessionState,
  vp: Viewport,
): void {
  // The service only includes the target while a camera can see it;
  // when it is null there is nothing the operator is entitled to know.
  if (!state.target) return;
  const [wx, wy] = cellToWorld(
    state.target[0],
    state.target[1],
    state.grid.resolution,
  );
  const [tx, ty] = worldToPx(wx, wy, vp);
  ctx.beginPath();
  ctx.moveTo(tx, ty - 7);
  ctx.lineTo(tx + 7, ty);
  ctx.lineTo(tx, ty + 7);
  ctx.lineTo(tx - 7, ty);
  ctx.closePath();
  ctx.strokeStyle = COLORS.target;
  ctx.lineWidth = 2;
  ctx.stroke();
  ctx.lineWidth = 1;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  state: SessionState,
  vp: Viewport,
): void {
  drawMap(ctx, state, vp);
  drawHeatmap(ctx, state.heatmap, state.grid.resolution, vp);
  drawCameras(ctx, state.map.cameras, vp);
  drawMapCell(ctx, state, vp);
  drawRobot(ctx, state, vp);
  drawTarget(ctx, state, vp);
}
