"""Collaborative target-search simulation.

A grid robot plans with A* toward the current MAP estimate, a 360-degree
detector fires at 1 Hz, security cameras reveal the target to a scripted
human observer, and the belief is fused per the selected information mode.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bayesfilter import (
    BeliefGrid,
    DetectionModel,
    entropy,
    map_estimate,
    prior_from_occupancy,
    update_language,
    update_sensor,
)
from .expert import RelationParams, default_params, expert_likelihood, ground_field
from .geometry import segment_crosses_polygon
from .parser import RELATIONS, parse, realize_sentence
from .worldmap import GridSpec, SecurityCamera, WorldMap, occupancy_grid

MODES = ("human-robot", "robot-only", "human-only", "uninformed")

_SQRT2 = math.sqrt(2.0)
# 8-connected neighborhood with axial cost 1 and diagonal cost sqrt(2)
_MOVES = [
    (-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
    (-1, -1, _SQRT2), (-1, 1, _SQRT2), (1, -1, _SQRT2), (1, 1, _SQRT2),
]


class NoPath(RuntimeError):
    """Goal cell is unreachable from the start cell."""


class InvalidScenario(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    wmap: WorldMap
    seed: int
    start: tuple[int, int]
    target: tuple[int, int]
    mode: str = "human-robot"
    max_steps: int = 10000
    detector: DetectionModel = field(default_factory=DetectionModel)
    resolution: float = 1.0
    human_cadence: int = 20
    negative_rate: float = 0.5
    target_noun: str = "bag"

    def validate(self, free: np.ndarray) -> None:
        if self.mode not in MODES:
            raise InvalidScenario(f"unknown mode {self.mode!r}")
        if self.max_steps < 1 or self.human_cadence < 1:
            raise InvalidScenario("max_steps and human_cadence must be positive")
        if not (0.0 <= self.negative_rate <= 1.0):
            raise InvalidScenario("negative_rate must be in [0, 1]")
        for name, cell in (("start", self.start), ("target", self.target)):
            r, c = cell
            if not (0 <= r < free.shape[0] and 0 <= c < free.shape[1]) or not free[r, c]:
                raise InvalidScenario(f"{name} cell {cell} is not free")


@dataclass
class SearchResult:
    success: bool
    steps: int
    entropy_trace: list[float]
    events: list[dict]
    final_cell: tuple[int, int]


def simulate_detection(
    robot: np.ndarray, target: np.ndarray, model: DetectionModel, rng: np.random.Generator
) -> bool:
    """Detector frame: Bernoulli(tp) when the target is within range.

    With the target beyond the detection range there is nothing in view to
    trigger on, so the frame is always negative. The filter's likelihood
    model still budgets 1 - tn for spurious detections, which just makes
    the belief update conservative rather than mismatched.
    """
    in_range = float(np.hypot(*(np.asarray(target) - np.asarray(robot)))) <= model.range_m
    if not in_range:
        return False
    return bool(rng.random() < model.tp)


def camera_visible(cam: SecurityCamera, target, wmap: WorldMap) -> bool:
    """Range, a ±fov/2 bearing cone, and an unobstructed line of sight."""
    d = np.asarray(target, dtype=float) - np.asarray(cam.position, dtype=float)
    dist = float(np.hypot(*d))
    if dist > cam.range_m:
        return False
    if dist > 0:
        off = math.atan2(d[1], d[0]) - cam.heading
        off = (off + math.pi) % (2 * math.pi) - math.pi
        if abs(off) > cam.fov / 2:
            return False
    for lm in wmap.landmarks:
        if segment_crosses_polygon(np.asarray(cam.position, float), np.asarray(target, float), lm.polygon):
            return False
    return True


def _octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dr, dc = abs(a[0] - b[0]), abs(a[1] - b[1])
    return (dr + dc) + (_SQRT2 - 2.0) * min(dr, dc)


def plan_path(
    spec: GridSpec, occupancy: np.ndarray, start: tuple[int, int], goal: tuple[int, int]
) -> list[tuple[int, int]]:
    """A* over free cells; returns the path including start and goal."""
    h, w = occupancy.shape
    for name, cell in (("start", start), ("goal", goal)):
        r, c = cell
        if not (0 <= r < h and 0 <= c < w) or occupancy[r, c]:
            raise NoPath(f"{name} cell {cell} is not free")
    if start == goal:
        return [start]
    g = np.full((h, w), np.inf)
    g[start] = 0.0
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    # heap entries carry a tiebreak counter for deterministic pop order
    heap: list[tuple[float, int, tuple[int, int]]] = [(_octile(start, goal), 0, start)]
    counter = 1
    closed = np.zeros((h, w), dtype=bool)
    while heap:
        _, _, cur = heapq.heappop(heap)
        if closed[cur]:
            continue
        if cur == goal:
            path = [cur]
            while cur != start:
                cur = parent[cur]
                path.append(cur)
            return path[::-1]
        closed[cur] = True
        r, c = cur
        for dr, dc, cost in _MOVES:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or occupancy[nr, nc] or closed[nr, nc]:
                continue
            cand = g[cur] + cost
            if cand < g[nr, nc] - 1e-12:
                g[nr, nc] = cand
                parent[(nr, nc)] = cur
                heapq.heappush(heap, (cand + _octile((nr, nc), goal), counter, (nr, nc)))
                counter += 1
    raise NoPath(f"no route from {start} to {goal}")


def dijkstra_costs(occupancy: np.ndarray, start: tuple[int, int]) -> np.ndarray:
    """Exact shortest-path costs from start to every free cell (test oracle)."""
    h, w = occupancy.shape
    g = np.full((h, w), np.inf)
    g[start] = 0.0
    heap: list[tuple[float, tuple[int, int]]] = [(0.0, start)]
    done = np.zeros((h, w), dtype=bool)
    while heap:
        d, cur = heapq.heappop(heap)
        if done[cur]:
            continue
        done[cur] = True
        r, c = cur
        for dr, dc, cost in _MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and not occupancy[nr, nc] and d + cost < g[nr, nc]:
                g[nr, nc] = d + cost
                heapq.heappush(heap, (d + cost, (nr, nc)))
    return g


def path_cost(path: list[tuple[int, int]]) -> float:
    total = 0.0
    for a, b in zip(path, path[1:]):
        total += 1.0 if abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1 else _SQRT2
    return total


class _FieldCache:
    """Grounded likelihood fields keyed by (relation, landmark)."""

    def __init__(
        self,
        wmap: WorldMap,
        spec: GridSpec,
        params: dict[str, RelationParams],
        occupancy: np.ndarray,
    ):
        self.wmap = wmap
        self.spec = spec
        self.params = params
        self.occupancy = occupancy
        self._fields: dict[tuple[str, str], np.ndarray] = {}
        self._at_target: dict[tuple[str, str], float] = {}

    def field(self, relation: str, lm_id: str) -> np.ndarray:
        key = (relation, lm_id)
        if key not in self._fields:
            self._fields[key] = ground_field(
                relation, lm_id, self.wmap, self.spec, self.params, self.occupancy
            ).values
        return self._fields[key]

    def at_point(self, relation: str, lm, point: np.ndarray) -> float:
        # the scripted human always evaluates at the fixed target location
        key = (relation, lm.id)
        if key not in self._at_target:
            self._at_target[key] = expert_likelihood(
                relation, point, lm, self.wmap, self.params[relation]
            )
        return self._at_target[key]


def scripted_human(
    cache: _FieldCache,
    belief: BeliefGrid,
    target_xy: np.ndarray,
    cfg: ScenarioConfig,
    rng: np.random.Generator,
) -> str | None:
    """Batch-mode stand-in for a live observer.

    If any camera sees the target, reports the (relation, landmark) pair whose
    expert likelihood at the target is highest. Otherwise, with probability
    cfg.negative_rate, truthfully denies the pair carrying the most belief
    mass among pairs whose likelihood at the target is low.
    """
    wmap = cache.wmap
    visible = any(camera_visible(cam, target_xy, wmap) for cam in wmap.cameras)
    pairs = [(rel, lm) for rel in RELATIONS for lm in wmap.landmarks]
    if visible:
        best, best_v = None, -1.0
        for rel, lm in pairs:
            v = cache.at_point(rel, lm, target_xy)
            if v > best_v:
                best, best_v = (rel, lm), v
        rel, lm = best
        sentence, _ = realize_sentence(rng, cfg.target_noun, rel, lm.name, negated=False)
        return sentence
    if rng.random() >= cfg.negative_rate:
        return None
    best, best_mass = None, 0.0
    for rel, lm in pairs:
        if cache.at_point(rel, lm, target_xy) > 0.5:
            continue  # denial would be false or uninformative
        mass = float(np.sum(belief.mass * cache.field(rel, lm.id)))
        if mass > best_mass:
            best, best_mass = (rel, lm), mass
    if best is None:
        return None
    rel, lm = best
    sentence, _ = realize_sentence(rng, cfg.target_noun, rel, lm.name, negated=True)
    return sentence


def run_scenario(
    cfg: ScenarioConfig, params: dict[str, RelationParams] | None = None
) -> SearchResult:
    """Run one search episode to success or the step cap.

    rng streams: SeedSequence(cfg.seed) children — 0: detector, 1: human.
    """
    params = params or default_params()
    spec = GridSpec.for_map(cfg.wmap, cfg.resolution)
    occ = occupancy_grid(cfg.wmap, spec).astype(bool)
    cfg.validate(~occ)
    det_rng, human_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2)
    )
    use_sensor = cfg.mode in ("human-robot", "robot-only")
    use_human = cfg.mode in ("human-robot", "human-only")
    belief = prior_from_occupancy(spec, occ)
    cache = _FieldCache(cfg.wmap, spec, params, occ)
    lexicon = cfg.wmap.lexicon()
    target_xy = spec.cell_center(*cfg.target)
    robot = cfg.start
    events: list[dict] = []
    trace: list[float] = [entropy(belief)]
    plan: list[tuple[int, int]] = []
    goal: tuple[int, int] | None = None

    success = False
    step = 0
    for step in range(1, cfg.max_steps + 1):
        new_goal, _ = map_estimate(belief)
        if new_goal != goal or not plan:
            goal = new_goal
            try:
                full = plan_path(spec, occ, robot, goal)
            except NoPath:
                full = [robot]
            plan = full[1:]
            events.append({"step": step, "type": "plan", "goal": list(goal), "length": len(full)})
        if plan:
            robot = plan.pop(0)
        robot_xy = spec.cell_center(*robot)

        detected = simulate_detection(robot_xy, target_xy, cfg.detector, det_rng)
        in_range = float(np.hypot(*(target_xy - robot_xy))) <= cfg.detector.range_m
        events.append(
            {"step": step, "type": "detection", "detected": detected, "cell": list(robot)}
        )
        if detected and in_range:
            success = True
            trace.append(entropy(belief))
            break
        if use_sensor:
            belief = update_sensor(belief, robot_xy, detected, cfg.detector)

        if use_human and step % cfg.human_cadence == 0:
            sentence = scripted_human(cache, belief, target_xy, cfg, human_rng)
            if sentence is not None:
                obs = parse(sentence, lexicon)
                events.append(
                    {"step": step, "type": "utterance", "sentence": sentence,
                     "observations": [o.as_dict() for o in obs]}
                )
                belief = update_language(belief, obs, cache.field)
        trace.append(entropy(belief))

    return SearchResult(success, step, trace, events, robot)


@dataclass
class ModeStats:
    mode: str
    steps: np.ndarray  # failures counted at the cap
    successes: int

    @property
    def mean(self) -> float:
        return float(self.steps.mean())

    @property
    def sd(self) -> float:
        return float(self.steps.std(ddof=1)) if len(self.steps) > 1 else 0.0


@dataclass
class BatchResult:
    modes: list[str]
    stats: dict[str, ModeStats]
    success_masks: dict[str, np.ndarray]
    limits: np.ndarray
    curves: dict[str, np.ndarray]  # success fraction per step limit
    pairwise_p: dict[tuple[str, str], float]  # Welch t-test on step counts

    def table(self) -> str:
        lines = ["mode\tn\tsuccesses\tmean_steps\tsd_steps"]
        for m in self.modes:
            st = self.stats[m]
            lines.append(
                f"{m}\t{len(st.steps)}\t{st.successes}\t{st.mean:.1f}\t{st.sd:.1f}"
            )
        return "\n".join(lines)

    def curve_pairs(self, mode: str) -> list[tuple[int, float]]:
        return [(int(l), float(f)) for l, f in zip(self.limits, self.curves[mode])]


def _run_one(args) -> tuple[str, int, bool, int]:
    cfg, params, mode = args
    res = run_scenario(
        ScenarioConfig(**{**cfg.__dict__, "mode": mode}), params
    )
    return mode, res.steps if res.success else cfg.max_steps, res.success, cfg.seed


def run_batch(
    cfgs: list[ScenarioConfig],
    modes: tuple[str, ...] = MODES,
    params: dict[str, RelationParams] | None = None,
    n_workers: int = 1,
    curve_points: int = 40,
) -> BatchResult:
    if len(cfgs) < 2:
        raise InvalidScenario("batch needs at least 2 scenarios")
    params = params or default_params()
    jobs = [(cfg, params, mode) for mode in modes for cfg in cfgs]
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_run_one, jobs, chunksize=4))
    else:
        rows = [_run_one(j) for j in jobs]

    cap = max(c.max_steps for c in cfgs)
    limits = np.unique(np.linspace(1, cap, curve_points).astype(int))
    stats_by_mode: dict[str, ModeStats] = {}
    masks: dict[str, np.ndarray] = {}
    curves: dict[str, np.ndarray] = {}
    for mode in modes:
        sub = [(s, ok) for m, s, ok, _ in rows if m == mode]
        steps = np.array([s for s, _ in sub])
        ok = np.array([o for _, o in sub])
        stats_by_mode[mode] = ModeStats(mode, steps, int(ok.sum()))
        masks[mode] = ok
        curves[mode] = np.array(
            [np.mean(ok & (steps <= lim)) for lim in limits]
        )
    pairwise: dict[tuple[str, str], float] = {}
    for i, a in enumerate(modes):
        for b in modes[i + 1 :]:
            t = stats.ttest_ind(
                stats_by_mode[a].steps, stats_by_mode[b].steps, equal_var=False
            )
            pairwise[(a, b)] = float(t.pvalue)
    return BatchResult(list(modes), stats_by_mode, masks, limits, curves, pairwise)
