"""Synthetic maps and curriculum training data.

Stage 1 data carries hard 0/1 labels from thresholded geometric rules (the
expert forms in the zero-softness limit). Stage 2 samples labels from the
expert likelihood itself, several draws per location, so the label noise
matches the model the network must calibrate to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..expert import RelationParams, default_params, expert_likelihood_many
from ..parser import RELATIONS
from ..worldmap import Landmark, WorldMap, front_directions


@dataclass(frozen=True)
class AnnotatedPoint:
    map_id: str
    landmark_id: str
    location: tuple[float, float]
    relation: str
    label: int
    provenance: str = "human"

    def as_dict(self) -> dict:
        return {
            "map": self.map_id,
            "landmark": self.landmark_id,
            "x": self.location[0],
            "y": self.location[1],
            "relation": self.relation,
            "label": self.label,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotatedPoint":
        return cls(
            map_id=d["map"],
            landmark_id=d["landmark"],
            location=(float(d["x"]), float(d["y"])),
            relation=d["relation"],
            label=int(d["label"]),
            provenance=d.get("provenance", "human"),
        )


def random_world_map(
    rng: np.random.Generator,
    map_id: str = "synth",
    extent: float = 64.0,
    n_landmarks: tuple[int, int] = (3, 6),
    size_range: tuple[float, float] = (6.0, 18.0),
    n_cameras: int = 0,
) -> WorldMap:
    """Random rectilinear landmarks with 1-3 entrances each, non-overlapping."""
    n = int(rng.integers(n_landmarks[0], n_landmarks[1] + 1))
    landmarks: list[Landmark] = []
    boxes: list[tuple[float, float, float, float]] = []
    attempts = 0
    while len(landmarks) < n and attempts < 300:
        attempts += 1
        w = float(rng.uniform(*size_range))
        h = float(rng.uniform(*size_range))
        x0 = float(rng.uniform(2.0, extent - w - 2.0))
        y0 = float(rng.uniform(2.0, extent - h - 2.0))
        box = (x0 - 3.0, y0 - 3.0, x0 + w + 3.0, y0 + h + 3.0)
        if any(
            not (box[2] < b[0] or b[2] < box[0] or box[3] < b[1] or b[3] < box[1])
            for b in boxes
        ):
            continue
        boxes.append(box)
        i = len(landmarks) + 1
        poly = np.array(
            [[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]]
        )
        edges = [(poly[j], poly[(j + 1) % 4]) for j in range(4)]
        k = int(rng.integers(1, 4))
        which = rng.choice(4, size=k, replace=False)
        entrances = []
        for e in which:
            a, b = edges[int(e)]
            t = float(rng.uniform(0.25, 0.75))
            entrances.append(a + t * (b - a))
        landmarks.append(
            Landmark(
                id=f"b{i}",
                name=f"Building {i}",
                polygon=poly,
                entrances=np.asarray(entrances),
            )
        )
    roads = []
    for _ in range(int(rng.integers(1, 3))):
        y = float(rng.uniform(2.0, extent - 2.0))
        roads.append(np.array([[1.0, y], [extent - 1.0, y]]))
    cams = ()
    if n_cameras:
        from ..worldmap import SecurityCamera

        cams = tuple(
            SecurityCamera(
                id=f"cam{j}",
                position=np.array(
                    [rng.uniform(2, extent - 2), rng.uniform(2, extent - 2)]
                ),
                heading=float(rng.uniform(0, 2 * np.pi)),
                fov=np.radians(45.0),
                range_m=float(rng.uniform(20.0, 40.0)),
            )
            for j in range(n_cameras)
        )
    return WorldMap(map_id, extent, extent, tuple(landmarks), tuple(roads), cams)


def hard_label(relation: str, x: np.ndarray, lm: Landmark, p: RelationParams) -> int:
    """Zero-softness (tau -> 0) limit of the expert forms."""
    from ..geometry import signed_distance

    d = signed_distance(x, lm.polygon)
    diam = lm.diameter()
    if relation in ("near", "close_to", "by", "next_to", "beside"):
        return int(d <= p.rho * diam)
    if relation == "at":
        return int(d <= p.rho * diam)
    if relation == "far_from":
        return int(d > p.rho * diam)
    if relation == "around":
        return int(0 < d and abs(d - p.width) <= 2.0)
    if relation in ("in_front_of", "behind"):
        dirs = front_directions(lm)
        if not dirs:
            return int(d <= p.rho * diam)
        best = -1.0
        for e, nvec in zip(lm.entrances, dirs):
            if relation == "behind":
                nvec = -nvec
            v = x - e
            norm = np.linalg.norm(v)
            if norm > 1e-12:
                best = max(best, float(v @ nvec / norm))
        return int(d <= p.rho * diam and best >= np.cos(np.pi / 4))
    raise ValueError(f"unknown relation: {relation}")


def _sample_location(rng: np.random.Generator, wmap: WorldMap, lm: Landmark) -> np.ndarray:
    """Mostly samples near the focus landmark so labels are informative."""
    if rng.random() < 0.7:
        center = lm.centroid()
        scale = max(lm.diameter(), 4.0)
        for _ in range(50):
            p = center + rng.normal(0.0, scale, size=2)
            if 0 <= p[0] <= wmap.width and 0 <= p[1] <= wmap.height:
                return p
    return rng.uniform([0, 0], [wmap.width, wmap.height])


def synthesize_stage1(
    rng: np.random.Generator,
    maps: list[WorldMap],
    per_relation: int = 40,
    relations: tuple[str, ...] = RELATIONS,
    params: dict[str, RelationParams] | None = None,
) -> list[AnnotatedPoint]:
    """Deterministic-label pretraining data, class-balanced by rejection."""
    params = params or default_params()
    out: list[AnnotatedPoint] = []
    for wmap in maps:
        for relation in relations:
            p = params[relation]
            for j in range(per_relation):
                want = j % 2  # alternate labels: balance in [0.3, 0.7] for free
                lm = wmap.landmarks[int(rng.integers(len(wmap.landmarks)))]
                for _ in range(200):
                    x = _sample_location(rng, wmap, lm)
                    if hard_label(relation, x, lm, p) == want:
                        out.append(
                            AnnotatedPoint(
                                map_id=wmap.id,
                                landmark_id=lm.id,
                                location=(float(x[0]), float(x[1])),
                                relation=relation,
                                label=want,
                                provenance="stage1-synthetic",
                            )
                        )
                        break
    return out


def synthesize_stage2(
    rng: np.random.Generator,
    maps: list[WorldMap],
    locations_per_map: int = 150,
    samples_per_location: int = 5,
    relations: tuple[str, ...] = RELATIONS,
    params: dict[str, RelationParams] | None = None,
) -> list[AnnotatedPoint]:
    """Stochastic labels drawn from the expert likelihood (m per location)."""
    if samples_per_location < 1:
        raise ValueError("samples_per_location must be >= 1")
    params = params or default_params()
    out: list[AnnotatedPoint] = []
    for wmap in maps:
        for _ in range(locations_per_map):
            lm = wmap.landmarks[int(rng.integers(len(wmap.landmarks)))]
            relation = str(rng.choice(relations))
            x = _sample_location(rng, wmap, lm)
            prob = float(
                expert_likelihood_many(relation, x[None], lm, params[relation])[0]
            )
            for _ in range(samples_per_location):
                out.append(
                    AnnotatedPoint(
                        map_id=wmap.id,
                        landmark_id=lm.id,
                        location=(float(x[0]), float(x[1])),
                        relation=relation,
                        label=int(rng.random() < prob),
                        provenance="stage2-synthetic",
                    )
                )
    return out


def generator_probability(
    point: AnnotatedPoint,
    maps: dict[str, WorldMap],
    params: dict[str, RelationParams] | None = None,
) -> float:
    """The Bernoulli probability stage 2 sampled this point's label from."""
    params = params or default_params()
    wmap = maps[point.map_id]
    lm = wmap.landmark(point.landmark_id)
    return float(
        expert_likelihood_many(
            point.relation,
            np.asarray(point.location)[None],
            lm,
            params[point.relation],
        )[0]
    )
