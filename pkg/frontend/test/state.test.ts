import { describe, expect, it } from "vitest";

import { applyDelta, describeEvent, fromSnapshot } from "../src/state.js";
import { Delta, SessionState } from "../src/types.js";

function snapshot(): SessionState {
  return {
    mode: "human-robot",
    seed: 0,
    step: 2,
    success: false,
    robot: [1, 1],
    plan: [],
    goal: null,
    grid: { rows: 4, cols: 4, resolution: 1 },
    map: { id: "m", width: 4, height: 4, landmarks: [], cameras: [] },
    target_visible: false,
    target: null,
    entropy_trace: [4.0, 3.9, 3.8],
    events: [],
    heatmap: { factor: 1, rows: 4, cols: 4, values: [[0.25]] },
    map_cell: [0, 0],
    map_xy: [0.5, 0.5],
    entropy: 3.8,
  };
}

function delta(step: number, entropy: number): Delta {
  return {
    event: { step, type: "detection", detected: false, cell: [1, 2] },
    robot: [1, 2],
    step,
    success: false,
    heatmap: { factor: 1, rows: 4, cols: 4, values: [[0.3]] },
    map_cell: [2, 2],
    map_xy: [2.5, 2.5],
    entropy,
  };
}

describe("applyDelta", () => {
  it("advances the display and appends trace and events", () => {
    const s1 = applyDelta(fromSnapshot(snapshot()), delta(3, 3.5));
    expect(s1.lastStep).toBe(3);
    expect(s1.snapshot.robot).toEqual([1, 2]);
    expect(s1.snapshot.entropy_trace).toEqual([4.0, 3.9, 3.8, 3.5]);
    expect(s1.snapshot.events).toHaveLength(1);
  });

  it("discards deltas with an older step index", () => {
    const s1 = applyDelta(fromSnapshot(snapshot()), delta(5, 3.0));
    const s2 = applyDelta(s1, delta(4, 9.9));
    expect(s2).toBe(s1); // identical object: nothing was applied
    expect(s2.snapshot.entropy).toBe(3.0);
  });

  it("accepts same-step deltas (multiple events within one step)", () => {
    const s1 = applyDelta(fromSnapshot(snapshot()), delta(3, 3.5));
    const s2 = applyDelta(s1, delta(3, 3.4));
    expect(s2.snapshot.events).toHaveLength(2);
    expect(s2.snapshot.entropy).toBe(3.4);
  });

  it("falls back to the event step when the delta carries none", () => {
    const d = delta(7, 2.0);
    delete d.step;
    const s1 = applyDelta(fromSnapshot(snapshot()), d);
    expect(s1.lastStep).toBe(7);
    expect(s1.snapshot.step).toBe(2); // snapshot step untouched without delta.step
  });
});

describe("describeEvent", () => {
  it("formats each event type", () => {
    expect(
      describeEvent({
        step: 1,
        type: "utterance",
        sentence: "hi",
        observations: [],
      }),
    ).toContain('"hi"');
    expect(
      describeEvent({ step: 2, type: "detection", detected: true, cell: [3, 4] }),
    ).toContain("HIT");
    expect(
      describeEvent({ step: 3, type: "plan", goal: [5, 6], length: 12 }),
    ).toContain("12 cells");
  });
});
