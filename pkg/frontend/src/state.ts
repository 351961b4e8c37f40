/**
 * Session display state: a pure reducer over service snapshots and deltas.
 *
 * The UI holds no truth of its own — everything shown comes from the last
 * snapshot plus deltas applied in arrival order. Deltas carrying a step
 * index older than what is already displayed are discarded, so a stale or
 * re-ordered websocket frame can never roll the display backwards.
 */

import { Delta, SessionEvent, SessionState } from "./types.js";

export interface DisplayState {
  snapshot: SessionState;
  lastStep: number;
}

export function fromSnapshot(snapshot: SessionState): DisplayState {
  return { snapshot, lastStep: snapshot.step };
}

/** Applies a delta; returns the same state object if the delta is stale. */
export function applyDelta(state: DisplayState, delta: Delta): DisplayState {
  const step = delta.step ?? delta.event.step;
  if (step < state.lastStep) {
    return state; // out-of-order frame: discard
  }
  const snap = state.snapshot;
  const next: SessionState = {
    ...snap,
    step: delta.step ?? snap.step,
    success: delta.success ?? snap.success,
    robot: delta.robot ?? snap.robot,
    heatmap: delta.heatmap,
    map_cell: delta.map_cell,
    map_xy: delta.map_xy,
    entropy: delta.entropy,
    entropy_trace: [...snap.entropy_trace, delta.entropy],
    events: [...snap.events, delta.event],
  };
  return { snapshot: next, lastStep: Math.max(state.lastStep, step) };
}

/** Human-readable one-liner for the event log pane. */
export function describeEvent(event: SessionEvent): string {
  switch (event.type) {
    case "utterance":
      return `#${event.step} said: "${event.sentence}"`;
    case "detection":
      return `#${event.step} detector ${event.detected ? "HIT" : "clear"} at (${event.cell[0]}, ${event.cell[1]})`;
    case "plan":
      return `#${event.step} replanned to (${event.goal[0]}, ${event.goal[1]}), ${event.length} cells`;
  }
}
