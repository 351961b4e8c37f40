"""Calibration experiment for the stage-2 aleatoric recovery test."""

import sys
import time

import numpy as np

from langground.nn.model import ArchConfig, LgnModel, build_pyramid, forward_head, roi_pool
from langground.nn.synth import generator_probability, random_world_map, synthesize_stage1, synthesize_stage2
from langground.nn.train import TrainConfig, prepare_rasters, train_stage

t0 = time.time()
rng = np.random.default_rng(42)
relations = tuple(sys.argv[1].split(",")) if len(sys.argv) > 1 else (
    "near", "far_from", "close_to", "at", "around", "in_front_of", "behind", "by", "next_to", "beside",
)
maps = [random_world_map(rng, f"m{i}", extent=32.0, n_landmarks=(2, 3), size_range=(5.0, 12.0)) for i in range(4)]
maps_by_id = {m.id: m for m in maps}

s1 = synthesize_stage1(rng, maps, per_relation=30, relations=relations)
train_pts = synthesize_stage2(rng, maps, locations_per_map=250, samples_per_location=8, relations=relations)
held = synthesize_stage2(rng, maps, locations_per_map=120, samples_per_location=1, relations=relations)
print(f"stage1={len(s1)} stage2={len(train_pts)} held={len(held)} gen {time.time()-t0:.1f}s")

arch = ArchConfig(feat=8, map_embed=16, rel_embed=8, head_hidden=8)
model = LgnModel.create(arch, seed=1)
cfg1 = TrainConfig(learning_rate=3e-3, max_epochs=30, patience=10, batch_size=64, seed=0)
cfg2 = TrainConfig(learning_rate=3e-3, max_epochs=120, patience=20, batch_size=64, seed=0)

rasters1, batch1 = prepare_rasters(maps_by_id, s1)
model, logs1 = train_stage(model, batch1, rasters1, cfg1, stage=1)
print(f"stage1 done: val={logs1[-1].val_nll:.4f} epochs={len(logs1)} t={time.time()-t0:.1f}s")

rasters2, batch2 = prepare_rasters(maps_by_id, train_pts)
model, logs2 = train_stage(model, batch2, rasters2, cfg2, stage=2)
print(f"stage2 done: val={logs2[-1].val_nll:.4f} best={min(l.val_nll for l in logs2):.4f} epochs={len(logs2)} t={time.time()-t0:.1f}s")

# held-out eval
rasters_h, batch_h = prepare_rasters(maps_by_id, held)
from langground.nn.model import nll
caches = {k: build_pyramid(model, v) for k, v in rasters_h.items()}
nlls, gaps = [], []
for pt, bp in zip(held, batch_h):
    pooled, _ = roi_pool(caches[bp.raster_key], bp.cell, arch.roi_k)
    p_hat = forward_head(model, pooled, bp.relation).p
    p_gen = generator_probability(pt, maps_by_id)
    nlls.append(nll(p_hat, bp.label))
    gaps.append(abs(p_hat - p_gen))
    # conditional entropy of the generator at this point
ents = []
for pt in held:
    p = generator_probability(pt, maps_by_id)
    p = min(max(p, 1e-12), 1 - 1e-12)
    ents.append(-(p * np.log(p) + (1 - p) * np.log(1 - p)))
print(f"held NLL={np.mean(nlls):.4f} gen-entropy={np.mean(ents):.4f} diff={np.mean(nlls)-np.mean(ents):.4f}")
print(f"mean |p_hat - p_gen| = {np.mean(gaps):.4f}")
print(f"total {time.time()-t0:.1f}s")
