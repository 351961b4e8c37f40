/** Wire types mirroring the session service schemas (see docs/api.md). */

export type Mode = "human-robot" | "robot-only" | "human-only" | "uninformed";

export interface Heatmap {
  factor: number;
  rows: number;
  cols: number;
  values: number[][];
}

export interface ObservationChip {
  target: string;
  relation: string;
  landmark: string;
  negated: boolean;
}

export interface UtteranceEvent {
  step: number;
  type: "utterance";
  sentence: string;
  observations: ObservationChip[];
}

export interface DetectionEvent {
  step: number;
  type: "detection";
  detected: boolean;
  cell: [number, number];
}

export interface PlanEvent {
  step: number;
  type: "plan";
  goal: [number, number];
  length: number;
}

export type SessionEvent = UtteranceEvent | DetectionEvent | PlanEvent;

export interface BeliefSummary {
  heatmap: Heatmap;
  map_cell: [number, number];
  map_xy: [number, number];
  entropy: number;
}

export interface Delta extends BeliefSummary {
  event: SessionEvent;
  robot?: [number, number];
  step?: number;
  success?: boolean;
}

export interface LandmarkDoc {
  id: string;
  name: string;
  polygon: [number, number][];
}

export interface CameraDoc {
  id: string;
  position: [number, number];
  heading: number; // radians, CCW from +x
  fov: number; // radians, full cone angle
  range: number;
}

export interface SessionState extends BeliefSummary {
  mode: Mode;
  seed: number;
  step: number;
  success: boolean;
  robot: [number, number];
  plan: [number, number][];
  goal: [number, number] | null;
  grid: { rows: number; cols: number; resolution: number };
  map: {
    id: string;
    width: number;
    height: number;
    landmarks: LandmarkDoc[];
    cameras: CameraDoc[];
  };
  target_visible: boolean;
  target: [number, number] | null;
  entropy_trace: number[];
  events: SessionEvent[];
}

export interface ParseErrorPayload {
  kind: string;
  detail: string;
}

export type SentenceResponse =
  | ({ ok: true; observations: ObservationChip[] } & BeliefSummary)
  | { ok: false; error: ParseErrorPayload };
