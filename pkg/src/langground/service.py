"""Session service hosting the human-in-the-loop search.

Each session owns one search episode: the operator submits spatial-language
sentences while the simulated robot steps, and reads back belief snapshots.
All mutations are serialized per session; a WebSocket stream pushes state
deltas in event order.
"""

from __future__ import annotations

import asyncio
import threading
import uuid
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import maps as bundled_maps
from .bayesfilter import (
    DetectionModel,
    entropy,
    map_estimate,
    prior_from_occupancy,
    update_language,
    update_sensor,
)
from .expert import default_params
from .parser import ParseError, parse
from .search import (
    MODES,
    NoPath,
    _FieldCache,
    camera_visible,
    plan_path,
    simulate_detection,
)
from .worldmap import GridSpec, WorldMap, occupancy_grid

HEATMAP_MAX = 128


class SessionError(Exception):
    def __init__(self, status: int, kind: str, detail: str):
        self.status, self.kind, self.detail = status, kind, detail
        super().__init__(detail)


def _cell(c) -> list[int]:
    return [int(c[0]), int(c[1])]


def _downsample(mass: np.ndarray) -> dict:
    """Block-sum the belief to at most HEATMAP_MAX cells per side."""
    rows, cols = mass.shape
    f = max(1, -(-max(rows, cols) // HEATMAP_MAX))
    pr, pc = -rows % f, -cols % f
    padded = np.pad(mass, ((0, pr), (0, pc)))
    blocks = padded.reshape(padded.shape[0] // f, f, padded.shape[1] // f, f)
    return {
        "factor": f,
        "rows": blocks.shape[0],
        "cols": blocks.shape[2],
        "values": blocks.sum(axis=(1, 3)).tolist(),
    }


@dataclass
class _Subscriber:
    queue: asyncio.Queue
    loop: asyncio.AbstractEventLoop


class SessionEngine:
    """One search episode, advanced step by step.

    rng streams: SeedSequence(seed) children — 0: detector, 1: placement of
    missing start/target cells.
    """

    def __init__(
        self,
        wmap: WorldMap,
        mode: str,
        seed: int,
        start: tuple[int, int] | None = None,
        target: tuple[int, int] | None = None,
        resolution: float = 1.0,
        max_steps: int = 10000,
    ):
        if mode not in MODES:
            raise SessionError(422, "InvalidMode", f"mode must be one of {MODES}")
        self.wmap = wmap
        self.mode = mode
        self.seed = seed
        self.max_steps = max_steps
        self.spec = GridSpec.for_map(wmap, resolution)
        self.occ = occupancy_grid(wmap, self.spec).astype(bool)
        det_ss, place_ss = np.random.SeedSequence(seed).spawn(2)
        self.det_rng = np.random.default_rng(det_ss)
        place_rng = np.random.default_rng(place_ss)
        free = np.argwhere(~self.occ)
        if len(free) == 0:
            raise SessionError(422, "InvalidMap", "map has no free cells")
        if start is None:
            start = tuple(int(v) for v in free[int(place_rng.integers(len(free)))])
        if target is None:
            target = tuple(int(v) for v in free[int(place_rng.integers(len(free)))])
        for name, cell in (("start", start), ("target", target)):
            r, c = cell
            if not (0 <= r < self.occ.shape[0] and 0 <= c < self.occ.shape[1]) or self.occ[r, c]:
                raise SessionError(422, "InvalidCell", f"{name} cell {cell} is not free")
        self.robot: tuple[int, int] = tuple(start)
        self.target: tuple[int, int] = tuple(target)
        self.target_xy = self.spec.cell_center(*self.target)
        self.params = default_params()
        self.cache = _FieldCache(wmap, self.spec, self.params, self.occ)
        self.belief = prior_from_occupancy(self.spec, self.occ)
        self.lexicon = wmap.lexicon()
        self.events: list[dict] = []
        self.entropy_trace: list[float] = [entropy(self.belief)]
        self.plan: list[tuple[int, int]] = []
        self.goal: tuple[int, int] | None = None
        self.step_count = 0
        self.success = False
        self.lock = threading.Lock()
        self.subscribers: list[_Subscriber] = []

    # -- event publication ---------------------------------------------------

    def _publish(self, delta: dict) -> None:
        for sub in list(self.subscribers):
            sub.loop.call_soon_threadsafe(sub.queue.put_nowait, delta)

    # -- operator input ------------------------------------------------------

    def submit_sentence(self, text: str) -> dict:
        if self.mode not in ("human-robot", "human-only"):
            raise SessionError(
                409, "ModeMismatch", f"mode {self.mode!r} does not fuse human observations"
            )
        try:
            obs = parse(text, self.lexicon)
        except ParseError as exc:
            return {
                "ok": False,
                "error": {"kind": type(exc).__name__, "detail": str(exc)},
            }
        self.belief = update_language(self.belief, obs, self.cache.field)
        self.entropy_trace.append(entropy(self.belief))
        event = {
            "step": self.step_count,
            "type": "utterance",
            "sentence": text,
            "observations": [o.as_dict() for o in obs],
        }
        self.events.append(event)
        delta = {"event": event, **self._belief_summary()}
        self._publish(delta)
        return {"ok": True, "observations": [o.as_dict() for o in obs], **self._belief_summary()}

    # -- simulation ----------------------------------------------------------

    def advance(self, n: int = 1) -> list[dict]:
        deltas = []
        for _ in range(n):
            if self.success or self.step_count >= self.max_steps:
                break
            deltas.append(self._step_once())
        return deltas

    def _step_once(self) -> dict:
        self.step_count += 1
        new_goal, _ = map_estimate(self.belief)
        if new_goal != self.goal or not self.plan:
            self.goal = new_goal
            try:
                full = plan_path(self.spec, self.occ, self.robot, self.goal)
            except NoPath:
                full = [self.robot]
            self.plan = full[1:]
            self.events.append(
                {"step": self.step_count, "type": "plan", "goal": _cell(self.goal),
                 "length": len(full)}
            )
        if self.plan:
            self.robot = self.plan.pop(0)
        robot_xy = self.spec.cell_center(*self.robot)
        detector = DetectionModel()
        detected = simulate_detection(robot_xy, self.target_xy, detector, self.det_rng)
        in_range = float(np.hypot(*(self.target_xy - robot_xy))) <= detector.range_m
        event = {
            "step": self.step_count, "type": "detection",
            "detected": detected, "cell": _cell(self.robot),
        }
        self.events.append(event)
        if detected and in_range:
            self.success = True
        elif self.mode in ("human-robot", "robot-only"):
            self.belief = update_sensor(self.belief, robot_xy, detected, detector)
        self.entropy_trace.append(entropy(self.belief))
        delta = {
            "event": event,
            "robot": _cell(self.robot),
            "success": self.success,
            "step": self.step_count,
            **self._belief_summary(),
        }
        self._publish(delta)
        return delta

    # -- snapshots -----------------------------------------------------------

    def _belief_summary(self) -> dict:
        rc, xy = map_estimate(self.belief)
        return {
            "heatmap": _downsample(self.belief.mass),
            "map_cell": _cell(rc),
            "map_xy": [float(xy[0]), float(xy[1])],
            "entropy": self.entropy_trace[-1],
        }

    def state(self) -> dict:
        visible = any(
            camera_visible(cam, self.target_xy, self.wmap) for cam in self.wmap.cameras
        )
        return {
            "mode": self.mode,
            "seed": self.seed,
            "step": self.step_count,
            "success": self.success,
            "robot": _cell(self.robot),
            "plan": [_cell(c) for c in self.plan],
            "goal": _cell(self.goal) if self.goal else None,
            "grid": {"rows": self.spec.rows, "cols": self.spec.cols,
                     "resolution": self.spec.resolution},
            "map": {
                "id": self.wmap.id,
                "width": self.wmap.width,
                "height": self.wmap.height,
                "landmarks": [
                    {"id": lm.id, "name": lm.name, "polygon": lm.polygon.tolist()}
                    for lm in self.wmap.landmarks
                ],
                "cameras": [
                    {"id": c.id, "position": c.position.tolist(), "heading": c.heading,
                     "fov": c.fov, "range": c.range_m}
                    for c in self.wmap.cameras
                ],
            },
            "target_visible": visible,
            "target": _cell(self.target) if visible else None,
            "entropy_trace": self.entropy_trace,
            "events": self.events,
            **self._belief_summary(),
        }

    def replay_belief(self) -> np.ndarray:
        """Re-derive the belief from the event log (bit-exact reproduction)."""
        detector = DetectionModel()
        b = prior_from_occupancy(self.spec, self.occ)
        for e in self.events:
            if e["type"] == "utterance":
                obs = parse(e["sentence"], self.lexicon)
                b = update_language(b, obs, self.cache.field)
            elif e["type"] == "detection":
                robot_xy = self.spec.cell_center(*e["cell"])
                is_final_hit = (
                    self.success
                    and e["step"] == self.step_count
                    and e["detected"]
                )
                if self.mode in ("human-robot", "robot-only") and not is_final_hit:
                    b = update_sensor(b, robot_xy, e["detected"], detector)
        return b.mass


# ---------------------------------------------------------------------------
# HTTP layer


class CreateSession(BaseModel):
    map: str = "demo"
    mode: str = "human-robot"
    seed: int = 0
    start: tuple[int, int] | None = None
    target: tuple[int, int] | None = None
    max_steps: int = 10000


class Sentence(BaseModel):
    text: str


class StepRequest(BaseModel):
    n: int = 1


def create_app(map_loader=None) -> FastAPI:
    app = FastAPI(title="langground session service")
    sessions: dict[str, SessionEngine] = {}
    loader = map_loader or bundled_maps.load_bundled

    def _get(sid: str) -> SessionEngine:
        if sid not in sessions:
            raise SessionError(404, "UnknownSession", f"no session {sid!r}")
        return sessions[sid]

    @app.exception_handler(SessionError)
    async def _session_error(_, exc: SessionError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"kind": exc.kind, "detail": exc.detail}},
        )

    @app.post("/sessions")
    def create_session(req: CreateSession):
        try:
            wmap = loader(req.map)
        except KeyError as exc:
            raise SessionError(404, "UnknownMap", str(exc))
        engine = SessionEngine(
            wmap, req.mode, req.seed, start=req.start, target=req.target,
            max_steps=req.max_steps,
        )
        sid = uuid.uuid4().hex
        sessions[sid] = engine
        return {"session_id": sid, "state": engine.state()}

    @app.post("/sessions/{sid}/sentence")
    def submit_sentence(sid: str, req: Sentence):
        engine = _get(sid)
        with engine.lock:
            return engine.submit_sentence(req.text)

    @app.post("/sessions/{sid}/step")
    def step(sid: str, req: StepRequest):
        if req.n < 1 or req.n > 10000:
            raise SessionError(422, "InvalidStepCount", "n must be in [1, 10000]")
        engine = _get(sid)
        with engine.lock:
            deltas = engine.advance(req.n)
        return {"deltas": deltas, "success": engine.success, "step": engine.step_count}

    @app.get("/sessions/{sid}/state")
    def state(sid: str):
        engine = _get(sid)
        with engine.lock:
            return engine.state()

    @app.websocket("/sessions/{sid}/events")
    async def events(ws: WebSocket, sid: str):
        await ws.accept()
        engine = sessions.get(sid)
        if engine is None:
            await ws.close(code=4004)
            return
        sub = _Subscriber(asyncio.Queue(), asyncio.get_running_loop())
        engine.subscribers.append(sub)
        # Race the delta queue against the socket so a client disconnect is
        # noticed even while no deltas are flowing.
        recv = asyncio.ensure_future(ws.receive())
        try:
            while True:
                get = asyncio.ensure_future(sub.queue.get())
                done, _ = await asyncio.wait(
                    {recv, get}, return_when=asyncio.FIRST_COMPLETED
                )
                if recv in done:
                    get.cancel()
                    msg = recv.result()
                    if msg.get("type") == "websocket.disconnect":
                        break
                    recv = asyncio.ensure_future(ws.receive())
                    if get in done:
                        await ws.send_json(get.result())
                elif get in done:
                    await ws.send_json(get.result())
        except WebSocketDisconnect:
            pass
        finally:
            recv.cancel()
            if sub in engine.subscribers:
                engine.subscribers.remove(sub)

    return app


app = create_app()
