"""Planar geometry primitives: point-in-polygon, signed distance, segment tests.

Polygons are (N, 2) float arrays of vertices in meters, implicitly closed.
"""

from __future__ import annotations

import numpy as np

EDGE_EPS = 1e-9


def _as_poly(poly) -> np.ndarray:
    p = np.asarray(poly, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 3:
        raise ValueError("polygon must be an (N>=3, 2) array")
    return p


def on_segment(p, a, b, eps: float = EDGE_EPS) -> bool:
    """True if point p lies on segment a-b within eps."""
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    ap = p - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return bool(np.hypot(*ap) <= eps)
    t = float(np.clip(ap @ ab / L2, 0.0, 1.0))
    closest = a + t * ab
    return bool(np.hypot(*(p - closest)) <= eps)


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Proper or improper intersection of closed segments p1-p2 and q1-q2."""
    p1, p2, q1, q2 = (np.asarray(v, dtype=float) for v in (p1, p2, q1, q2))

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) <= EDGE_EPS:
            return 0
        return 1 if v > 0 else -1

    o1 = orient(p1, p2, q1)
    o2 = orient(p1, p2, q2)
    o3 = orient(q1, q2, p1)
    o4 = orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(q1, p1, p2):
        return True
    if o2 == 0 and on_segment(q2, p1, p2):
        return True
    if o3 == 0 and on_segment(p1, q1, q2):
        return True
    if o4 == 0 and on_segment(p2, q1, q2):
        return True
    return False


def polygon_is_simple(poly) -> bool:
    """Brute-force check that no two non-adjacent edges intersect."""
    poly = _as_poly(poly)
    n = len(poly)
    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            # adjacent edges share an endpoint; skip them (including wrap)
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def point_in_polygon(p, poly) -> bool:
    """Even-odd test; a point exactly on an edge counts as inside."""
    poly = _as_poly(poly)
    x, y = float(p[0]), float(p[1])
    n = len(poly)
    for i in range(n):
        if on_segment((x, y), poly[i], poly[(i + 1) % n]):
            return True
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        if (yi > y) != (yj > y):
            x_cross = xi + (y - yi) / (yj - yi) * (xj - xi)
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def points_in_polygon(pts: np.ndarray, poly) -> np.ndarray:
    """Vectorized even-odd test for an (M, 2) array of points.

    Boundary points count as inside (same tie-break as point_in_polygon).
    """
    poly = _as_poly(poly)
    pts = np.asarray(pts, dtype=float)
    x = pts[:, 0]
    y = pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[(i + 1) % n]
        crosses = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = xi + (y - yi) / (yj - yi) * (xj - xi)
        inside ^= crosses & (x < x_cross)
    # boundary override
    d = _dist_to_edges(pts, poly).min(axis=1)
    return inside | (d <= EDGE_EPS)


def _dist_to_edges(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """(M, E) distances from each point to each polygon edge segment."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a  # (E,2)
    L2 = np.maximum((ab * ab).sum(axis=1), 1e-30)  # (E,)
    ap = pts[:, None, :] - a[None, :, :]  # (M,E,2)
    t = np.clip((ap * ab[None]).sum(axis=2) / L2[None], 0.0, 1.0)  # (M,E)
    closest = a[None] + t[:, :, None] * ab[None]
    diff = pts[:, None, :] - closest
    return np.sqrt((diff * diff).sum(axis=2))


def distance_to_boundary(p, poly) -> float:
    poly = _as_poly(poly)
    return float(_dist_to_edges(np.asarray([p], dtype=float), poly)[0].min())


def signed_distance(p, poly) -> float:
    """Distance from p to the polygon boundary, negative strictly inside."""
    d = distance_to_boundary(p, poly)
    return -d if point_in_polygon(p, _as_poly(poly)) else d


def signed_distances(pts: np.ndarray, poly) -> np.ndarray:
    """Vectorized signed distance for an (M, 2) array of points."""
    poly = _as_poly(poly)
    pts = np.asarray(pts, dtype=float)
    d = _dist_to_edges(pts, poly).min(axis=1)
    inside = points_in_polygon(pts, poly)
    return np.where(inside, -d, d)


def polygon_diameter(poly) -> float:
    """Max pairwise vertex distance."""
    poly = _as_poly(poly)
    diff = poly[:, None, :] - poly[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=2)).max())


def polygon_centroid(poly) -> np.ndarray:
    poly = _as_poly(poly)
    return poly.mean(axis=0)


def segment_crosses_polygon(p, q, poly) -> bool:
    """True if open segment p-q intersects any edge of poly."""
    poly = _as_poly(poly)
    n = len(poly)
    for i in range(n):
        if segments_intersect(p, q, poly[i], poly[(i + 1) % n]):
            return True
    return False
