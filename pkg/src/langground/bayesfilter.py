"""Grid-based recursive Bayesian estimator over free cells.

Updates run in log space with one exponentiate-normalize step per update so
long scenarios (thousands of likelihood products) never underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expert import LikelihoodField
from .parser import SpatialObservation
from .worldmap import GridSpec


class DegenerateUpdate(RuntimeError):
    """Likelihood annihilated the prior; the belief was left unchanged."""


class NoFreeCells(ValueError):
    pass


@dataclass
class BeliefGrid:
    spec: GridSpec
    mass: np.ndarray  # (rows, cols), sums to 1 over free cells
    free: np.ndarray  # (rows, cols) bool
    degenerate_flag: bool = False

    def copy(self) -> "BeliefGrid":
        return BeliefGrid(self.spec, self.mass.copy(), self.free, self.degenerate_flag)

    def check(self) -> None:
        assert abs(self.mass.sum() - 1.0) < 1e-9
        assert (self.mass >= 0).all()
        assert (self.mass[~self.free] == 0).all()


def init_prior(spec: GridSpec, free: np.ndarray) -> BeliefGrid:
    """Uniform belief over free cells."""
    free = np.asarray(free, dtype=bool)
    n = int(free.sum())
    if n == 0:
        raise NoFreeCells("map has no free cells")
    mass = np.zeros(free.shape, dtype=float)
    mass[free] = 1.0 / n
    return BeliefGrid(spec=spec, mass=mass, free=free)


def prior_from_occupancy(spec: GridSpec, occupancy: np.ndarray) -> BeliefGrid:
    return init_prior(spec, np.asarray(occupancy) < 0.5)


def predict(b: BeliefGrid, kernel: np.ndarray | None = None) -> BeliefGrid:
    """Chapman-Kolmogorov prediction step.

    kernel is an (N, N) row-stochastic matrix over free cells in row-major
    order; None means a static target (identity kernel).
    """
    if kernel is None:
        return b.copy()
    kernel = np.asarray(kernel, dtype=float)
    n = int(b.free.sum())
    if kernel.shape != (n, n):
        raise ValueError(f"kernel must be ({n}, {n})")
    rowsum = kernel.sum(axis=1)
    if not np.allclose(rowsum, 1.0, atol=1e-9):
        raise ValueError("kernel rows must sum to 1")
    m = b.mass[b.free]
    m2 = kernel.T @ m
    mass = np.zeros_like(b.mass)
    mass[b.free] = m2 / m2.sum()
    return BeliefGrid(b.spec, mass, b.free)


def _apply_likelihood(b: BeliefGrid, lik: np.ndarray) -> BeliefGrid:
    """Multiply by a per-cell likelihood in log space and renormalize."""
    lik = np.asarray(lik, dtype=float)
    if lik.shape != b.mass.shape:
        raise ValueError("likelihood dims do not match belief")
    free = b.free
    m = b.mass[free]
    l = lik[free]
    with np.errstate(divide="ignore"):
        logp = np.where(m > 0, np.log(np.maximum(m, 1e-300)), -np.inf) + np.where(
            l > 0, np.log(np.maximum(l, 1e-300)), -np.inf
        )
    mx = logp.max()
    if not np.isfinite(mx):
        flagged = b.copy()
        flagged.degenerate_flag = True
        return flagged
    p = np.exp(logp - mx)
    total = p.sum()
    mass = np.zeros_like(b.mass)
    mass[free] = p / total
    return BeliefGrid(b.spec, mass, free)


@dataclass(frozen=True)
class DetectionModel:
    tp: float = 0.8  # P(detect | target in range)
    tn: float = 0.8  # P(no detect | target out of range)
    range_m: float = 25.0


def sensor_likelihood(
    b: BeliefGrid, robot_xy, detected: bool, sensor: DetectionModel
) -> np.ndarray:
    """Per-cell p(z | target at cell) under the TP/TN disk model."""
    centers = b.spec.cell_centers().reshape(b.spec.rows, b.spec.cols, 2)
    dist = np.linalg.norm(centers - np.asarray(robot_xy, dtype=float), axis=2)
    in_range = dist <= sensor.range_m
    if detected:
        return np.where(in_range, sensor.tp, 1.0 - sensor.tn)
    return np.where(in_range, 1.0 - sensor.tp, sensor.tn)


def update_sensor(
    b: BeliefGrid, robot_xy, detected: bool, sensor: DetectionModel
) -> BeliefGrid:
    return _apply_likelihood(b, sensor_likelihood(b, robot_xy, detected, sensor))


def update_language(
    b: BeliefGrid,
    obs: SpatialObservation | list[SpatialObservation],
    grounder,
) -> BeliefGrid:
    """Fuse spatial-language observations.

    grounder(relation, landmark_id) -> LikelihoodField. A list of observations
    (one sentence with several clauses) is applied as a sequential product.
    """
    if isinstance(obs, SpatialObservation):
        obs = [obs]
    out = b
    for o in obs:
        fld = grounder(o.relation, o.landmark_id)
        vals = fld.values if isinstance(fld, LikelihoodField) else np.asarray(fld)
        if o.negated:
            vals = 1.0 - vals
        out = _apply_likelihood(out, vals)
    return out


def map_estimate(b: BeliefGrid) -> tuple[tuple[int, int], np.ndarray]:
    """Argmax cell (ties: lowest row-major index) and its center in meters."""
    flat = int(np.argmax(b.mass))
    rc = (flat // b.spec.cols, flat % b.spec.cols)
    return rc, b.spec.cell_center(*rc)


def entropy(b: BeliefGrid) -> float:
    """Shannon entropy in nats, with 0 ln 0 := 0."""
    m = b.mass[b.mass > 0]
    return float(-(m * np.log(m)).sum())
