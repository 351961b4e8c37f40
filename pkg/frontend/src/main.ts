/** Operator console entry point: wires the DOM to the session service.
 *
 * All displayed state lives in one DisplayState value produced by the pure
 * reducer in state.ts; this module only forwards service responses into it
 * and redraws. Changing mode always creates a fresh session — the filter's
 * history is mode-dependent, so there is deliberately no mode toggle on a
 * live session.
 */

import { ApiError, SessionClient } from "./api.js";
import { applyDelta, describeEvent, DisplayState, fromSnapshot } from "./state.js";
import { drawScene, makeViewport } from "./render.js";
import { drawSparkline } from "./sparkline.js";
import { Delta, Mode, ObservationChip, SessionState } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

const BASE_URL = `${location.protocol}//${location.hostname}:8000`;

let client: SessionClient | null = null;
let display: DisplayState | null = null;
let socket: WebSocket | null = null;
let playTimer: number | null = null;

function setBanner(text: string): void {
  const el = $<HTMLDivElement>("banner");
  el.textContent = text;
  el.style.display = text ? "block" : "none";
}

function setStatus(text: string): void {
  $<HTMLSpanElement>("status").textContent = text;
}

/** Reject snapshots that would make every draw call throw. */
function validateSnapshot(s: SessionState): string | null {
  if (!s.map || !Array.isArray(s.map.landmarks)) return "map missing";
  if (!s.heatmap || !Array.isArray(s.heatmap.values)) return "heatmap missing";
  if (!Array.isArray(s.robot) || s.robot.length !== 2) return "robot pose missing";
  return null;
}

function redraw(): void {
  if (!display) return;
  const snap = display.snapshot;
  const canvas = $<HTMLCanvasElement>("map");
  const ctx = canvas.getContext("2d")!;
  drawScene(ctx, snap, makeViewport(snap, canvas.width, canvas.height));

  const spark = $<HTMLCanvasElement>("sparkline");
  drawSparkline(
    spark.getContext("2d")!,
    snap.entropy_trace,
    spark.width,
    spark.height,
  );

  setStatus(
    `${snap.mode} · step ${snap.step}` +
      (snap.success ? " · target found" : "") +
      (snap.target ? " · target on camera" : ""),
  );

  const log = $<HTMLUListElement>("events");
  log.innerHTML = "";
  for (const event of snap.events.slice(-30).reverse()) {
    const li = document.createElement("li");
    li.textContent = describeEvent(event);
    log.appendChild(li);
  }
}

function onDelta(delta: Delta): void {
  if (!display) return;
  display = applyDelta(display, delta);
  redraw();
}

function showChips(observations: ObservationChip[]): void {
  const box = $<HTMLDivElement>("chips");
  box.innerHTML = "";
  for (const obs of observations) {
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.textContent =
      `${obs.target} · ${obs.negated ? "NOT " : ""}${obs.relation} · ${obs.landmark}`;
    box.appendChild(chip);
  }
}

function showParseError(kind: string, detail: string): void {
  const el = $<HTMLDivElement>("parse-error");
  el.textContent = `${kind}: ${detail}`;
  el.style.display = "block";
}

function clearSentenceFeedback(): void {
  $<HTMLDivElement>("chips").innerHTML = "";
  const el = $<HTMLDivElement>("parse-error");
  el.textContent = "";
  el.style.display = "none";
}

async function newSession(): Promise<void> {
  stopPlayback();
  socket?.close();
  socket = null;
  clearSentenceFeedback();
  setBanner("");

  const map = $<HTMLInputElement>("map-name").value.trim() || "demo";
  const mode = $<HTMLSelectElement>("mode").value as Mode;
  const seed = Number($<HTMLInputElement>("seed").value) || 0;
  try {
    const made = await SessionClient.create(BASE_URL, map, mode, seed);
    const bad = validateSnapshot(made.state);
    if (bad) {
      setBanner(`Malformed session snapshot: ${bad}`);
      return;
    }
    client = made.client;
    display = fromSnapshot(made.state);
    socket = client.events(onDelta, () => setStatus("event stream closed"));
    const canSpeak = mode === "human-robot" || mode === "human-only";
    $<HTMLInputElement>("sentence").disabled = !canSpeak;
    $<HTMLButtonElement>("send").disabled = !canSpeak;
    redraw();
  } catch (err) {
    setBanner(err instanceof ApiError ? `${err.kind}: ${err.message}` : String(err));
  }
}

async function sendSentence(): Promise<void> {
  if (!client) return;
  const input = $<HTMLInputElement>("sentence");
  const text = input.value.trim();
  if (!text) return; // nothing typed, nothing sent
  clearSentenceFeedback();
  try {
    const resp = await client.sentence(text);
    if (resp.ok) {
      showChips(resp.observations);
      input.value = "";
    } else {
      // Display stays untouched on a parse failure; only the error line moves.
      showParseError(resp.error.kind, resp.error.detail);
    }
  } catch (err) {
    if (err instanceof ApiError) showParseError(err.kind, err.message);
    else setBanner(String(err));
  }
}

async function stepOnce(n = 1): Promise<void> {
  if (!client) return;
  try {
    const resp = await client.step(n);
    // Deltas also arrive on the websocket; applying them here too is safe
    // because the reducer drops anything older than what is on screen.
    for (const delta of resp.deltas) onDelta(delta);
    if (resp.success) stopPlayback();
  } catch (err) {
    stopPlayback();
    setBanner(err instanceof ApiError ? `${err.kind}: ${err.message}` : String(err));
  }
}

function startPlayback(): void {
  if (playTimer !== null || !client) return;
  playTimer = window.setInterval(() => void stepOnce(1), 120);
  $<HTMLButtonElement>("play").textContent = "Pause";
}

function stopPlayback(): void {
  if (playTimer !== null) {
    window.clearInterval(playTimer);
    playTimer = null;
  }
  const btn = document.getElementById("play") as HTMLButtonElement | null;
  if (btn) btn.textContent = "Play";
}

export function init(): void {
  $<HTMLButtonElement>("new-session").onclick = () => void newSession();
  $<HTMLButtonElement>("send").onclick = () => void sendSentence();
  $<HTMLInputElement>("sentence").onkeydown = (e) => {
    if (e.key === "Enter") void sendSentence();
  };
  $<HTMLButtonElement>("step").onclick = () => void stepOnce(1);
  $<HTMLButtonElement>("step10").onclick = () => void stepOnce(10);
  $<HTMLButtonElement>("play").onclick = () =>
    playTimer === null ? startPlayback() : stopPlayback();
}

if (typeof document !== "undefined" && document.getElementById("map")) {
  init();
}
