"""Environment model: landmarks, cameras, grid specs, and rasterization.

The map file format is JSON (version 1):

    {
      "version": 1,
      "id": "demo",
      "extent": {"width": 64.0, "height": 64.0},
      "landmarks": [{"id": "b1", "name": "Building 1",
                     "polygon": [[x, y], ...], "entrances": [[x, y], ...]}],
      "roads": [[[x, y], ...], ...],
      "cameras": [{"id": "c1", "position": [x, y], "heading_deg": 90.0,
                   "fov_deg": 45.0, "range_m": 30.0}]
    }

Coordinates are meters, y increases north. All values are immutable after
construction; instances are safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import geometry

ENTRANCE_EPS = 0.5  # max distance of an entrance from its polygon boundary


class MapFormatError(ValueError):
    """Raised for malformed or invariant-violating map documents."""


@dataclass(frozen=True)
class Landmark:
    id: str
    name: str
    polygon: np.ndarray  # (N, 2) meters
    entrances: np.ndarray  # (E, 2) meters, possibly empty

    def diameter(self) -> float:
        return geometry.polygon_diameter(self.polygon)

    def centroid(self) -> np.ndarray:
        return geometry.polygon_centroid(self.polygon)


@dataclass(frozen=True)
class SecurityCamera:
    id: str
    position: np.ndarray  # (2,) meters
    heading: float  # radians, CCW from +x
    fov: float  # radians, full cone angle
    range_m: float


@dataclass(frozen=True)
class WorldMap:
    id: str
    width: float
    height: float
    landmarks: tuple[Landmark, ...]
    roads: tuple[np.ndarray, ...] = ()
    cameras: tuple[SecurityCamera, ...] = ()

    def landmark(self, lm_id: str) -> Landmark:
        for lm in self.landmarks:
            if lm.id == lm_id:
                return lm
        raise KeyError(f"unknown landmark id: {lm_id}")

    def lexicon(self) -> dict[str, str]:
        """Landmark name -> id map for the parser."""
        return {lm.name: lm.id for lm in self.landmarks}


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    resolution: float = 1.0  # meters per cell
    origin: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def for_map(cls, wmap: WorldMap, resolution: float = 1.0) -> "GridSpec":
        return cls(
            rows=int(math.ceil(wmap.height / resolution - 1e-9)),
            cols=int(math.ceil(wmap.width / resolution - 1e-9)),
            resolution=resolution,
        )

    def cell_centers(self) -> np.ndarray:
        """(rows*cols, 2) meter coordinates of cell centers, row-major."""
        ox, oy = self.origin
        cs = ox + (np.arange(self.cols) + 0.5) * self.resolution
        rs = oy + (np.arange(self.rows) + 0.5) * self.resolution
        xx, yy = np.meshgrid(cs, rs)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def cell_center(self, row: int, col: int) -> np.ndarray:
        ox, oy = self.origin
        return np.array(
            [ox + (col + 0.5) * self.resolution, oy + (row + 0.5) * self.resolution]
        )

    def cell_of(self, p) -> tuple[int, int]:
        ox, oy = self.origin
        col = int((p[0] - ox) / self.resolution)
        row = int((p[1] - oy) / self.resolution)
        return (min(max(row, 0), self.rows - 1), min(max(col, 0), self.cols - 1))


@dataclass(frozen=True)
class RasterStack:
    """Semantic channels rasterized for one focus landmark."""

    spec: GridSpec
    occupancy: np.ndarray  # 1 iff cell center inside any landmark polygon
    focus_mask: np.ndarray  # 1 iff cell center inside the focus landmark
    entrance_mask: np.ndarray  # focus entrances, dilated one cell
    road_mask: np.ndarray
    sdf: np.ndarray  # signed distance (m) to focus boundary, negative inside
    focus_id: str = ""

    def stacked(self, diag_norm: float | None = None) -> np.ndarray:
        """(H, W, 5) network input; sdf normalized by the map diagonal."""
        if diag_norm is None:
            diag_norm = math.hypot(
                self.spec.cols * self.spec.resolution,
                self.spec.rows * self.spec.resolution,
            )
        return np.stack(
            [
                self.occupancy,
                self.focus_mask,
                self.entrance_mask,
                self.road_mask,
                self.sdf / diag_norm,
            ],
            axis=-1,
        )


def _validate_landmark(lm: Landmark, width: float, height: float) -> None:
    poly = lm.polygon
    if len(poly) < 3:
        raise MapFormatError(f"landmark {lm.id}: polygon needs >=3 vertices")
    if not geometry.polygon_is_simple(poly):
        raise MapFormatError(f"landmark {lm.id}: polygon is self-intersecting")
    if (poly[:, 0] < -1e-9).any() or (poly[:, 0] > width + 1e-9).any() or (
        poly[:, 1] < -1e-9
    ).any() or (poly[:, 1] > height + 1e-9).any():
        raise MapFormatError(f"landmark {lm.id}: vertex outside map extent")
    for e in lm.entrances:
        if geometry.distance_to_boundary(e, poly) > ENTRANCE_EPS:
            raise MapFormatError(
                f"landmark {lm.id}: entrance {e.tolist()} is off the boundary"
            )


def load_map(data: bytes | str | dict) -> WorldMap:
    """Parse and validate a version-1 map document."""
    if isinstance(data, (bytes, str)):
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as exc:
            raise MapFormatError(f"malformed map document: {exc}") from exc
    else:
        doc = data
    if not isinstance(doc, dict) or doc.get("version") != 1:
        raise MapFormatError("map document must have version: 1")
    try:
        extent = doc["extent"]
        width = float(extent["width"])
        height = float(extent["height"])
        landmarks = []
        for ld in doc.get("landmarks", []):
            landmarks.append(
                Landmark(
                    id=str(ld["id"]),
                    name=str(ld.get("name", ld["id"])),
                    polygon=np.asarray(ld["polygon"], dtype=float),
                    entrances=np.asarray(
                        ld.get("entrances", []), dtype=float
                    ).reshape(-1, 2),
                )
            )
        roads = tuple(
            np.asarray(r, dtype=float).reshape(-1, 2) for r in doc.get("roads", [])
        )
        cameras = tuple(
            SecurityCamera(
                id=str(c.get("id", f"cam{i}")),
                position=np.asarray(c["position"], dtype=float),
                heading=math.radians(float(c["heading_deg"])),
                fov=math.radians(float(c.get("fov_deg", 45.0))),
                range_m=float(c["range_m"]),
            )
            for i, c in enumerate(doc.get("cameras", []))
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MapFormatError(f"malformed map document: {exc}") from exc

    ids = [lm.id for lm in landmarks]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise MapFormatError(f"duplicate landmark id(s): {dup}")
    for lm in landmarks:
        _validate_landmark(lm, width, height)
    for cam in cameras:
        if cam.range_m <= 0:
            raise MapFormatError(f"camera {cam.id}: range must be positive")
    return WorldMap(
        id=str(doc.get("id", "map")),
        width=width,
        height=height,
        landmarks=tuple(landmarks),
        roads=roads,
        cameras=cameras,
    )


def dump_map(wmap: WorldMap) -> str:
    """Serialize back to the version-1 document format."""
    doc = {
        "version": 1,
        "id": wmap.id,
        "extent": {"width": wmap.width, "height": wmap.height},
        "landmarks": [
            {
                "id": lm.id,
                "name": lm.name,
                "polygon": lm.polygon.tolist(),
                "entrances": lm.entrances.tolist(),
            }
            for lm in wmap.landmarks
        ],
        "roads": [r.tolist() for r in wmap.roads],
        "cameras": [
            {
                "id": c.id,
                "position": c.position.tolist(),
                "heading_deg": math.degrees(c.heading),
                "fov_deg": math.degrees(c.fov),
                "range_m": c.range_m,
            }
            for c in wmap.cameras
        ],
    }
    return json.dumps(doc, sort_keys=True)


def occupancy_grid(wmap: WorldMap, spec: GridSpec) -> np.ndarray:
    """(rows, cols) float grid; 1.0 iff cell center inside any landmark."""
    centers = spec.cell_centers()
    occ = np.zeros(len(centers), dtype=bool)
    for lm in wmap.landmarks:
        occ |= geometry.points_in_polygon(centers, lm.polygon)
    return occ.reshape(spec.rows, spec.cols).astype(float)


def _dilate3(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= mask[:, :-1]
    out[:, :-1] |= mask[:, 1:]
    out[1:, 1:] |= mask[:-1, :-1]
    out[1:, :-1] |= mask[:-1, 1:]
    out[:-1, 1:] |= mask[1:, :-1]
    out[:-1, :-1] |= mask[1:, 1:]
    return out


def rasterize(wmap: WorldMap, focus: str, spec: GridSpec) -> RasterStack:
    """Rasterize the map with one landmark in focus. Deterministic."""
    lm = wmap.landmark(focus)  # raises KeyError for unknown focus
    centers = spec.cell_centers()

    occ = occupancy_grid(wmap, spec)
    focus_mask = (
        geometry.points_in_polygon(centers, lm.polygon)
        .reshape(spec.rows, spec.cols)
        .astype(float)
    )

    ent = np.zeros((spec.rows, spec.cols), dtype=bool)
    for e in lm.entrances:
        r, c = spec.cell_of(e)
        ent[r, c] = True
    ent = _dilate3(ent)

    road = np.zeros((spec.rows, spec.cols), dtype=bool)
    step = spec.resolution / 4.0
    for poly in wmap.roads:
        for a, b in zip(poly[:-1], poly[1:]):
            seg = np.asarray(b) - np.asarray(a)
            n = max(int(np.hypot(*seg) / step), 1)
            for t in np.linspace(0.0, 1.0, n + 1):
                p = np.asarray(a) + t * seg
                r, c = spec.cell_of(p)
                road[r, c] = True

    sdf = geometry.signed_distances(centers, lm.polygon).reshape(
        spec.rows, spec.cols
    )
    return RasterStack(
        spec=spec,
        occupancy=occ,
        focus_mask=focus_mask,
        entrance_mask=ent.astype(float),
        road_mask=road.astype(float),
        sdf=sdf,
        focus_id=focus,
    )


def front_directions(lm: Landmark) -> list[np.ndarray]:
    """One outward unit normal per entrance; empty if no entrances.

    The normal belongs to the boundary edge nearest the entrance point and is
    oriented away from the polygon interior.
    """
    poly = lm.polygon
    n = len(poly)
    out: list[np.ndarray] = []
    for e in lm.entrances:
        dists = geometry._dist_to_edges(np.asarray([e], dtype=float), poly)[0]
        i = int(np.argmin(dists))
        a, b = poly[i], poly[(i + 1) % n]
        edge = b - a
        normal = np.array([edge[1], -edge[0]])
        normal = normal / np.linalg.norm(normal)
        # orient away from the interior using a probe toward the centroid
        probe = geometry.polygon_centroid(poly) - (a + b) / 2.0
        if normal @ probe > 0:
            normal = -normal
        out.append(normal)
    return out


def transform_world_map(wmap: WorldMap, k_rot: int = 0, mirror: bool = False) -> WorldMap:
    """Dihedral transform (k*90 deg CCW rotations, then x-mirror) of a map.

    Requires a square extent for rotations so the extent is preserved.
    """
    w, h = wmap.width, wmap.height
    if k_rot % 4 != 0 and abs(w - h) > 1e-9:
        raise ValueError("rotation transforms require a square map extent")

    def tp(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2).copy()
        for _ in range(k_rot % 4):
            pts = np.column_stack([w - pts[:, 1], pts[:, 0]])
        if mirror:
            pts[:, 0] = w - pts[:, 0]
        return pts

    landmarks = tuple(
        Landmark(lm.id, lm.name, tp(lm.polygon), tp(lm.entrances))
        for lm in wmap.landmarks
    )
    roads = tuple(tp(r) for r in wmap.roads)
    cameras = tuple(
        SecurityCamera(
            c.id,
            tp(c.position[None])[0],
            _transform_heading(c.heading, k_rot, mirror),
            c.fov,
            c.range_m,
        )
        for c in wmap.cameras
    )
    tag = f"{wmap.id}#r{k_rot % 4}" + ("m" if mirror else "")
    return WorldMap(tag, w, h, landmarks, roads, cameras)


def transform_point(p, wmap: WorldMap, k_rot: int = 0, mirror: bool = False) -> np.ndarray:
    w = wmap.width
    x, y = float(p[0]), float(p[1])
    for _ in range(k_rot % 4):
        x, y = w - y, x
    if mirror:
        x = w - x
    return np.array([x, y])


def _transform_heading(theta: float, k_rot: int, mirror: bool) -> float:
    theta = theta + (k_rot % 4) * math.pi / 2.0
    if mirror:
        theta = math.pi - theta
    return theta % (2.0 * math.pi)
