"""Adam trainer with step-decay schedule, early stopping, and the
three-stage curriculum (deterministic labels -> sampled labels -> human data).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..worldmap import GridSpec, WorldMap, rasterize
from .model import BatchPoint, LgnModel, batch_gradients, build_pyramid
from .synth import AnnotatedPoint

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 5e-5
    lr_step_epochs: int = 10
    lr_decay: float = 0.6
    patience: int = 20
    batch_size: int = 64
    max_epochs: int = 200
    val_fraction: float = 0.15
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")

    def lr_at_epoch(self, epoch: int) -> float:
        """Learning rate for a 1-based epoch index under the step decay."""
        return self.learning_rate * self.lr_decay ** ((epoch - 1) // self.lr_step_epochs)


@dataclass
class EpochLog:
    stage: int
    epoch: int
    lr: float
    train_nll: float
    val_nll: float


class AdamState:
    def __init__(self, model: LgnModel, cfg: TrainConfig):
        self.m = model.zero_like()
        self.v = model.zero_like()
        self.t = 0
        self.cfg = cfg

    def step(self, model: LgnModel, grads: dict[str, np.ndarray], lr: float) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for k, g in grads.items():
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            mhat = self.m[k] / bc1
            vhat = self.v[k] / bc2
            model.weights[k] -= lr * mhat / (np.sqrt(vhat) + c.eps)


def prepare_rasters(
    maps: dict[str, WorldMap],
    points: list[AnnotatedPoint],
    resolution: float = 1.0,
) -> tuple[dict[str, np.ndarray], list[BatchPoint]]:
    """Rasterize every (map, focus landmark) pair a dataset touches.

    Returns the raster arrays keyed "map_id/landmark_id" and the dataset
    converted to grid-cell batch points.
    """
    rasters: dict[str, np.ndarray] = {}
    batch: list[BatchPoint] = []
    specs: dict[str, GridSpec] = {}
    for pt in points:
        key = f"{pt.map_id}/{pt.landmark_id}"
        if key not in rasters:
            wmap = maps[pt.map_id]
            spec = specs.setdefault(
                pt.map_id, GridSpec.for_map(wmap, resolution)
            )
            rasters[key] = rasterize(wmap, pt.landmark_id, spec).stacked()
        spec = specs[pt.map_id]
        batch.append(
            BatchPoint(
                raster_key=key,
                cell=spec.cell_of(pt.location),
                relation=pt.relation,
                label=pt.label,
            )
        )
    return rasters, batch


def dataset_nll(
    model: LgnModel, points: list[BatchPoint], rasters: dict[str, np.ndarray]
) -> float:
    return float(np.mean(dataset_predictions(model, points, rasters)[1]))


def dataset_predictions(
    model: LgnModel, points: list[BatchPoint], rasters: dict[str, np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (p_hat, nll) arrays, in dataset order."""
    from .model import REL_INDEX, forward_head_batch, roi_pool_batch

    groups: dict[str, list[int]] = {}
    for i, pt in enumerate(points):
        groups.setdefault(pt.raster_key, []).append(i)
    k = model.arch.roi_k
    p_out = np.empty(len(points))
    for key, idx in groups.items():
        cache = build_pyramid(model, rasters[key])
        cells = np.array([points[i].cell for i in idx], dtype=int)
        onehot = np.zeros((len(idx), model.arch.n_relations))
        for j, i in enumerate(idx):
            onehot[j, REL_INDEX[points[i].relation]] = 1.0
        pooled, _ = roi_pool_batch(cache, cells, k)
        p_out[idx] = forward_head_batch(model, pooled, onehot).p
    labels = np.array([pt.label for pt in points], dtype=float)
    p = np.clip(p_out, 1e-300, 1.0 - 1e-16)
    nlls = -(labels * np.log(p) + (1 - labels) * np.log(1 - p))
    return p_out, nlls


def train_stage(
    model: LgnModel,
    points: list[BatchPoint],
    rasters: dict[str, np.ndarray],
    cfg: TrainConfig,
    stage: int = 1,
    adam: AdamState | None = None,
) -> tuple[LgnModel, list[EpochLog]]:
    """One curriculum stage: Adam + StepLR + early stopping on validation NLL."""
    if not points:
        raise ValueError(f"stage {stage}: empty dataset")
    rng = np.random.default_rng(cfg.seed + stage)
    idx = rng.permutation(len(points))
    n_val = max(int(len(points) * cfg.val_fraction), 1)
    val = [points[i] for i in idx[:n_val]]
    train = [points[i] for i in idx[n_val:]] or val
    adam = adam or AdamState(model, cfg)
    best = model.copy()
    best_val = float("inf")
    bad_epochs = 0
    logs: list[EpochLog] = []
    for epoch in range(1, cfg.max_epochs + 1):
        lr = cfg.lr_at_epoch(epoch)
        order = rng.permutation(len(train))
        losses = []
        for s in range(0, len(train), cfg.batch_size):
            batch = [train[i] for i in order[s : s + cfg.batch_size]]
            grads, loss = batch_gradients(model, batch, rasters)
            adam.step(model, grads, lr)
            losses.append(loss)
        val_nll = dataset_nll(model, val, rasters)
        logs.append(
            EpochLog(stage, epoch, lr, float(np.mean(losses)), val_nll)
        )
        if val_nll < best_val - 1e-6:
            best_val = val_nll
            best = model.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                log.info("stage %d: early stop at epoch %d", stage, epoch)
                break
    model.weights = best.weights
    return model, logs


def train_curriculum(
    model: LgnModel,
    stage_datasets: list[list[AnnotatedPoint]],
    maps: dict[str, WorldMap],
    cfg: TrainConfig,
    resolution: float = 1.0,
) -> tuple[LgnModel, list[EpochLog]]:
    """Run stages in order, carrying weights (and Adam moments) forward.

    An empty stage-3 dataset (no human annotations) is skipped with a warning;
    an empty earlier stage is an error.
    """
    logs: list[EpochLog] = []
    adam = AdamState(model, cfg)
    for i, points in enumerate(stage_datasets, start=1):
        if not points:
            if i == len(stage_datasets) and i == 3:
                log.warning("stage 3: no human annotations; skipping fine-tuning")
                continue
            raise ValueError(f"stage {i}: empty dataset")
        rasters, batch = prepare_rasters(maps, points, resolution)
        model, stage_logs = train_stage(model, batch, rasters, cfg, stage=i, adam=adam)
        logs.extend(stage_logs)
    return model, logs
