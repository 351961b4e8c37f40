"""Evaluation protocol: region splits, dihedral augmentation, NLL statistics.

Works over any grounding model that maps (map, landmark, location, relation)
to a Bernoulli probability: the learned network, the expert rules, or the
uniform-chance baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .expert import ChanceModel, RelationParams, default_params, expert_likelihood
from .nn.model import LgnModel
from .nn.synth import AnnotatedPoint
from .nn.train import dataset_predictions, prepare_rasters
from .worldmap import WorldMap, transform_point, transform_world_map

HIST_LO, HIST_HI, HIST_STEP = 0.0, 2.0, 0.05


class TooFewRegions(ValueError):
    pass


def split_by_region(
    dataset: list[AnnotatedPoint], seed: int, ratio: tuple[int, int] = (3, 2)
) -> tuple[list[AnnotatedPoint], list[AnnotatedPoint]]:
    """Region-disjoint split; a region is one map id. Ratio defaults to 3:2."""
    regions = sorted({p.map_id for p in dataset})
    if len(regions) < 2:
        raise TooFewRegions(f"need >= 2 regions, have {len(regions)}")
    rng = np.random.default_rng(seed)
    order = [regions[i] for i in rng.permutation(len(regions))]
    n_train = round(len(regions) * ratio[0] / (ratio[0] + ratio[1]))
    n_train = min(max(n_train, 1), len(regions) - 1)
    train_regions = set(order[:n_train])
    train = [p for p in dataset if p.map_id in train_regions]
    test = [p for p in dataset if p.map_id not in train_regions]
    return train, test


DIHEDRAL = [(k, m) for m in (False, True) for k in range(4)]


def augment(
    dataset: list[AnnotatedPoint],
    maps: dict[str, WorldMap],
    transforms: list[tuple[int, bool]] | None = None,
) -> tuple[list[AnnotatedPoint], dict[str, WorldMap]]:
    """Add rotated/mirrored copies of each record.

    Map rasters and locations transform jointly; labels are unchanged. The
    returned map table contains the originals plus one entry per transform,
    keyed "<map_id>@r<k>m<0|1>".
    """
    transforms = DIHEDRAL[1:] if transforms is None else transforms
    out = list(dataset)
    out_maps = dict(maps)
    for k, m in transforms:
        if (k, m) == (0, False):
            continue
        suffix = f"@r{k}m{int(m)}"
        for map_id, wmap in maps.items():
            out_maps[map_id + suffix] = replace(
                transform_world_map(wmap, k, m), id=map_id + suffix
            )
        for p in dataset:
            loc = transform_point(p.location, maps[p.map_id], k, m)
            out.append(
                replace(p, map_id=p.map_id + suffix, location=(loc[0], loc[1]))
            )
    return out, out_maps


# ---------------------------------------------------------------------------
# Grounding-model adapters: each returns per-point predictions on a dataset.


class LgnGrounding:
    def __init__(self, model: LgnModel, resolution: float = 1.0):
        self.model = model
        self.resolution = resolution

    def predictions(
        self, points: list[AnnotatedPoint], maps: dict[str, WorldMap]
    ) -> np.ndarray:
        rasters, batch = prepare_rasters(maps, points, self.resolution)
        p_hat, _ = dataset_predictions(self.model, batch, rasters)
        return p_hat


class ExpertGrounding:
    def __init__(self, params: dict[str, RelationParams] | None = None):
        self.params = params or default_params()

    def predictions(
        self, points: list[AnnotatedPoint], maps: dict[str, WorldMap]
    ) -> np.ndarray:
        out = np.empty(len(points))
        for i, p in enumerate(points):
            wmap = maps[p.map_id]
            out[i] = expert_likelihood(
                p.relation,
                np.asarray(p.location),
                wmap.landmark(p.landmark_id),
                wmap,
                self.params[p.relation],
            )
        return out


class ChanceGrounding:
    def __init__(self, seed: int = 0):
        self.seed = seed

    def predictions(
        self, points: list[AnnotatedPoint], maps: dict[str, WorldMap]
    ) -> np.ndarray:
        model = ChanceModel(self.seed)
        return np.array([model.likelihood() for _ in points])


def point_nlls(p_hat: np.ndarray, labels: np.ndarray) -> np.ndarray:
    p = np.clip(np.asarray(p_hat, dtype=float), 1e-300, 1.0 - 1e-16)
    y = np.asarray(labels, dtype=float)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


@dataclass
class EvalReport:
    mean: float
    sd: float
    bin_edges: np.ndarray  # [0, 2] at 0.05
    bin_counts: np.ndarray
    overflow: int  # points with NLL > 2, kept out of the bins
    per_relation: dict[str, tuple[float, int]]  # relation -> (mean NLL, n)
    nlls: np.ndarray

    def histogram_rows(self) -> str:
        rows = [
            f"{lo:.2f}\t{lo + HIST_STEP:.2f}\t{int(c)}"
            for lo, c in zip(self.bin_edges[:-1], self.bin_counts)
        ]
        rows.append(f">\t{HIST_HI:.2f}\t{self.overflow}")
        return "\n".join(rows)


def eval_nll(
    grounding, points: list[AnnotatedPoint], maps: dict[str, WorldMap]
) -> EvalReport:
    if not points:
        raise ValueError("empty test set")
    p_hat = grounding.predictions(points, maps)
    nlls = point_nlls(p_hat, np.array([p.label for p in points]))
    edges = np.arange(HIST_LO, HIST_HI + HIST_STEP / 2, HIST_STEP)
    in_range = nlls <= HIST_HI
    counts, _ = np.histogram(nlls[in_range], bins=edges)
    per_rel: dict[str, tuple[float, int]] = {}
    for rel in sorted({p.relation for p in points}):
        mask = np.array([p.relation == rel for p in points])
        per_rel[rel] = (float(nlls[mask].mean()), int(mask.sum()))
    return EvalReport(
        mean=float(nlls.mean()),
        sd=float(nlls.std(ddof=1)) if len(nlls) > 1 else 0.0,
        bin_edges=edges,
        bin_counts=counts,
        overflow=int((~in_range).sum()),
        per_relation=per_rel,
        nlls=nlls,
    )


def compare(nll_a: np.ndarray, nll_b: np.ndarray) -> dict:
    """Paired two-sided t-test on per-point NLL differences (A minus B)."""
    a, b = np.asarray(nll_a), np.asarray(nll_b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    if np.allclose(diff, 0.0):
        return {"mean_diff": 0.0, "p_value": 1.0}
    t = stats.ttest_rel(a, b)
    return {"mean_diff": float(diff.mean()), "p_value": float(t.pvalue)}


# ---------------------------------------------------------------------------
# Annotation file format: one record per line, tab-separated.
# map id, landmark id, x, y, relation, label, annotator id


def dump_annotations(points: list[AnnotatedPoint]) -> str:
    lines = ["map\tlandmark\tx\ty\trelation\tlabel\tannotator"]
    for p in points:
        lines.append(
            f"{p.map_id}\t{p.landmark_id}\t{p.location[0]!r}\t{p.location[1]!r}"
            f"\t{p.relation}\t{p.label}\t{p.provenance}"
        )
    return "\n".join(lines) + "\n"


def load_annotations(text: str) -> list[AnnotatedPoint]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split("\t")[0] != "map":
        raise ValueError("missing annotation header line")
    out = []
    for ln in lines[1:]:
        f = ln.split("\t")
        if len(f) != 7:
            raise ValueError(f"bad annotation line: {ln!r}")
        out.append(
            AnnotatedPoint(
                map_id=f[0],
                landmark_id=f[1],
                location=(float(f[2]), float(f[3])),
                relation=f[4],
                label=int(f[5]),
                provenance=f[6],
            )
        )
    return out
