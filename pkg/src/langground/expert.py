"""Rule-based spatial-relation likelihood models, MLE fitting, chance baseline.

Each relation maps a query point x to a probability via a parametric form in
the signed distance d(x) to the landmark boundary (negative inside), the
landmark diameter D, and (for front/behind) the angle to entrance normals:

    proximity family (near, close_to, by, next_to, beside, at):
        sigma((rho*D - d) / tau); "at" pins 1 - floor for d <= 0
    far_from:        1 - sigma((rho*D - d) / tau)
    in_front_of:     max over entrances e of proximity * exp(kappa*(cos(theta_e) - 1))
    behind:          same with negated front directions
    around:          exp(-(d - w)^2 / (2 tau^2)) outside, floor inside

Values are clamped to [floor, 1 - floor] unless clamp=False.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .worldmap import GridSpec, Landmark, WorldMap, front_directions, occupancy_grid

PROXIMITY_RELATIONS = ("near", "close_to", "by", "next_to", "beside", "at")
DEFAULT_FLOOR = 0.01


class DegenerateDataset(ValueError):
    pass


@dataclass(frozen=True)
class RelationParams:
    rho: float  # proximity scale, multiples of landmark diameter
    tau: float  # softness, meters
    kappa: float = 0.0  # angular concentration (front/behind)
    width: float = 0.0  # annulus radius, meters (around)
    floor: float = DEFAULT_FLOOR

    def validate(self) -> "RelationParams":
        ok = (
            self.tau > 0
            and self.rho > 0
            and self.kappa >= 0
            and self.width >= 0
            and 0 < self.floor <= 0.05
            and all(
                math.isfinite(v)
                for v in (self.rho, self.tau, self.kappa, self.width, self.floor)
            )
        )
        if not ok:
            raise ValueError(f"invalid relation params: {self}")
        return self


def default_params() -> dict[str, RelationParams]:
    return {
        "at": RelationParams(rho=0.25, tau=1.0),
        "near": RelationParams(rho=1.0, tau=3.0),
        "close_to": RelationParams(rho=0.6, tau=2.0),
        "by": RelationParams(rho=0.6, tau=2.0),
        "next_to": RelationParams(rho=0.4, tau=1.5),
        "beside": RelationParams(rho=0.4, tau=1.5),
        "far_from": RelationParams(rho=2.0, tau=5.0),
        "in_front_of": RelationParams(rho=1.0, tau=3.0, kappa=2.0),
        "behind": RelationParams(rho=1.0, tau=3.0, kappa=2.0),
        "around": RelationParams(rho=1.0, tau=2.0, width=3.0),
    }


def save_params(params: dict[str, RelationParams]) -> str:
    return json.dumps({r: asdict(p) for r, p in params.items()}, sort_keys=True)


def load_params(text: str | bytes) -> dict[str, RelationParams]:
    doc = json.loads(text)
    return {r: RelationParams(**v).validate() for r, v in doc.items()}


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _raw_values(
    relation: str,
    d: np.ndarray,
    diameter: float,
    p: RelationParams,
    cos_terms: list[np.ndarray] | None,
) -> np.ndarray:
    """Unclamped likelihood for signed distances d (vectorized)."""
    prox = _sigmoid((p.rho * diameter - d) / p.tau)
    if relation in PROXIMITY_RELATIONS:
        v = prox
        if relation == "at":
            v = np.where(d <= 0, 1.0 - p.floor, v)
        return v
    if relation == "far_from":
        return 1.0 - prox
    if relation in ("in_front_of", "behind"):
        if not cos_terms:
            return prox  # no entrances: fall back to the near form
        best = None
        for cos_e in cos_terms:
            val = prox * np.exp(p.kappa * (cos_e - 1.0))
            best = val if best is None else np.maximum(best, val)
        return best
    if relation == "around":
        ring = np.exp(-((d - p.width) ** 2) / (2.0 * p.tau**2))
        return np.where(d > 0, ring, p.floor)
    raise ValueError(f"unknown relation: {relation}")


def _entrance_terms(
    relation: str,
    pts: np.ndarray,
    lm: Landmark,
) -> list[np.ndarray] | None:
    """Per-entrance cos(angle to the front direction) arrays for front/behind."""
    if relation not in ("in_front_of", "behind"):
        return None
    dirs = front_directions(lm)
    if not dirs:
        return None
    out = []
    for e, n in zip(lm.entrances, dirs):
        if relation == "behind":
            n = -n
        rel_vec = pts - e[None, :]
        dist = np.linalg.norm(rel_vec, axis=1)
        cos_t = np.where(dist > 1e-12, rel_vec @ n / np.maximum(dist, 1e-12), 1.0)
        out.append(cos_t)
    return out


def expert_likelihood_many(
    relation: str,
    pts: np.ndarray,
    lm: Landmark,
    params: RelationParams,
    clamp: bool = True,
) -> np.ndarray:
    """Likelihood at an (M, 2) array of points."""
    params.validate()
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    from .geometry import signed_distances

    d = signed_distances(pts, lm.polygon)
    diameter = lm.diameter()
    cos_terms = _entrance_terms(relation, pts, lm)
    v = _raw_values(relation, d, diameter, params, cos_terms)
    if clamp:
        v = np.clip(v, params.floor, 1.0 - params.floor)
    return v


def expert_likelihood(
    relation: str,
    x,
    lm: Landmark,
    wmap: WorldMap,
    params: RelationParams,
    clamp: bool = True,
) -> float:
    return float(
        expert_likelihood_many(relation, np.asarray([x], dtype=float), lm, params, clamp)[0]
    )


@dataclass(frozen=True)
class LikelihoodField:
    values: np.ndarray  # (rows, cols) in [floor, 1-floor]
    relation: str
    landmark_id: str
    spec: GridSpec


def ground_field(
    relation: str,
    lm_id: str,
    wmap: WorldMap,
    spec: GridSpec,
    params: dict[str, RelationParams] | None = None,
    occupancy: np.ndarray | None = None,
) -> LikelihoodField:
    """Evaluate a relation's likelihood at every cell center.

    Cells inside buildings get the probability floor, except that "at" keeps
    its interior value for the focus landmark. Pass a precomputed occupancy
    grid to skip recomputing it per field.
    """
    params = params or default_params()
    p = params[relation]
    lm = wmap.landmark(lm_id)
    centers = GridSpec.cell_centers(spec)
    vals = expert_likelihood_many(relation, centers, lm, p).reshape(
        spec.rows, spec.cols
    )
    if occupancy is None:
        occupancy = occupancy_grid(wmap, spec)
    occ = np.asarray(occupancy) > 0.5
    if relation == "at":
        from .geometry import points_in_polygon

        inside_focus = points_in_polygon(centers, lm.polygon).reshape(
            spec.rows, spec.cols
        )
        blocked = occ & ~inside_focus
    else:
        blocked = occ
    vals = np.where(blocked, p.floor, vals)
    return LikelihoodField(values=vals, relation=relation, landmark_id=lm_id, spec=spec)


# ---------------------------------------------------------------------------
# MLE fitting


_FITTED_FIELDS = {
    "in_front_of": ("rho", "tau", "kappa"),
    "behind": ("rho", "tau", "kappa"),
    "around": ("tau", "width"),
    "far_from": ("rho", "tau"),
}


def _fit_fields(relation: str) -> tuple[str, ...]:
    return _FITTED_FIELDS.get(relation, ("rho", "tau"))


def _loglik(relation, theta, fields, base: RelationParams, pts_by_lm, labels_by_lm):
    """Bernoulli log-likelihood; theta holds log-space parameter values."""
    kw = dict(zip(fields, np.exp(theta)))
    p = RelationParams(
        rho=kw.get("rho", base.rho),
        tau=kw.get("tau", base.tau),
        kappa=kw.get("kappa", base.kappa),
        width=kw.get("width", base.width),
        floor=base.floor,
    )
    total = 0.0
    for (lm, pts), labels in zip(pts_by_lm, labels_by_lm):
        v = expert_likelihood_many(relation, pts, lm, p)
        total += float(
            np.sum(labels * np.log(v) + (1 - labels) * np.log(1.0 - v))
        )
    return total


def fit_expert_params(
    dataset: list[tuple[WorldMap, str, str, np.ndarray, int]],
    init: dict[str, RelationParams] | None = None,
    max_iter: int = 5000,
    grad_tol: float = 1e-6,
) -> dict[str, RelationParams]:
    """Fit per-relation parameters by gradient ascent on the Bernoulli NLL.

    Dataset rows are (map, landmark_id, relation, location, label). Parameters
    are optimized in log space (positivity by construction) with a numeric
    central-difference gradient and backtracking line search, so the objective
    never decreases across accepted steps.
    """
    init = init or default_params()
    by_rel: dict[str, list] = {}
    for wmap, lm_id, relation, loc, label in dataset:
        by_rel.setdefault(relation, []).append((wmap, lm_id, loc, int(label)))

    fitted = dict(init)
    for relation, rows in by_rel.items():
        labels_all = np.array([r[3] for r in rows])
        if labels_all.min() == labels_all.max():
            raise DegenerateDataset(
                f"relation {relation}: needs both positive and negative labels"
            )
        # group points per landmark so distances vectorize
        groups: dict[tuple[str, str], list[int]] = {}
        for i, (wmap, lm_id, _, _) in enumerate(rows):
            groups.setdefault((wmap.id, lm_id), []).append(i)
        pts_by_lm = []
        labels_by_lm = []
        for (map_id, lm_id), idx in groups.items():
            wmap = rows[idx[0]][0]
            lm = wmap.landmark(lm_id)
            pts = np.asarray([rows[i][2] for i in idx], dtype=float)
            pts_by_lm.append((lm, pts))
            labels_by_lm.append(labels_all[idx])

        base = init[relation]
        fields = _fit_fields(relation)
        theta = np.log([getattr(base, f) for f in fields])
        f0 = _loglik(relation, theta, fields, base, pts_by_lm, labels_by_lm)
        step = 0.5
        h = 1e-5
        for _ in range(max_iter):
            grad = np.zeros_like(theta)
            for k in range(len(theta)):
                tp = theta.copy()
                tp[k] += h
                tm = theta.copy()
                tm[k] -= h
                grad[k] = (
                    _loglik(relation, tp, fields, base, pts_by_lm, labels_by_lm)
                    - _loglik(relation, tm, fields, base, pts_by_lm, labels_by_lm)
                ) / (2 * h)
            grad /= max(len(labels_all), 1)
            if np.max(np.abs(grad)) < grad_tol:
                break
            # backtracking line search on the ascent direction
            accepted = False
            s = step
            for _ in range(40):
                cand = theta + s * grad
                fc = _loglik(relation, cand, fields, base, pts_by_lm, labels_by_lm)
                if fc > f0:
                    theta, f0 = cand, fc
                    accepted = True
                    break
                s *= 0.5
            if not accepted:
                break
            step = min(s * 2.0, 10.0)
        kw = dict(zip(fields, np.exp(theta)))
        fitted[relation] = RelationParams(
            rho=kw.get("rho", base.rho),
            tau=kw.get("tau", base.tau),
            kappa=kw.get("kappa", base.kappa),
            width=kw.get("width", base.width),
            floor=base.floor,
        ).validate()
    return fitted


# ---------------------------------------------------------------------------
# chance baseline


class ChanceModel:
    """Uniform-random likelihood baseline (Chance)."""

    def __init__(self, seed: int | np.random.Generator = 0):
        self.rng = (
            seed
            if isinstance(seed, np.random.Generator)
            else np.random.default_rng(seed)
        )

    def likelihood(self, *_args, **_kwargs) -> float:
        return float(chance_likelihood(self.rng))


def chance_likelihood(rng: np.random.Generator) -> float:
    """An i.i.d. U(0,1) draw, nudged into the open interval."""
    v = float(rng.uniform())
    return min(max(v, 1e-12), 1.0 - 1e-12)
