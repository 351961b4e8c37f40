"""Feature-pyramid likelihood grounding network with hand-derived gradients.

The graph is fixed: a bottom-up chain of stride-2 3x3 convs (tanh), lateral
1x1 projections with top-down nearest-2x fusion and 3x3 smoothing, ROI window
average pooling per level, then dense map/relation encoders whose embeddings
are concatenated into a sigmoid head. All gradients are exact reverse-mode
derivatives of the mean Bernoulli NLL.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import kernels
from ..parser import RELATIONS

REL_INDEX = {r: i for i, r in enumerate(RELATIONS)}


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ArchConfig:
    in_channels: int = 5
    feat: int = 16  # F: channels per pyramid level
    levels: int = 4
    roi_k: int = 5
    map_embed: int = 32  # E_m
    rel_embed: int = 16  # E_r
    head_hidden: int = 16
    n_relations: int = 10
    pyramid: bool = True  # False: coarsest level only (single-level ablation)

    @property
    def pooled_dim(self) -> int:
        return self.feat * (self.levels if self.pyramid else 1)


def _weight_shapes(a: ArchConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    cin = a.in_channels
    for l in range(1, a.levels):
        shapes[f"bu{l}_w"] = (3, 3, cin, a.feat)
        shapes[f"bu{l}_b"] = (a.feat,)
        cin = a.feat
    lat_levels = range(a.levels) if a.pyramid else [a.levels - 1]
    for l in lat_levels:
        c = a.in_channels if l == 0 else a.feat
        shapes[f"lat{l}_w"] = (c, a.feat)
        shapes[f"lat{l}_b"] = (a.feat,)
        shapes[f"smooth{l}_w"] = (3, 3, a.feat, a.feat)
        shapes[f"smooth{l}_b"] = (a.feat,)
    shapes["mapenc_w"] = (a.pooled_dim, a.map_embed)
    shapes["mapenc_b"] = (a.map_embed,)
    shapes["relenc_w"] = (a.n_relations, a.rel_embed)
    shapes["relenc_b"] = (a.rel_embed,)
    shapes["head1_w"] = (a.map_embed + a.rel_embed, a.head_hidden)
    shapes["head1_b"] = (a.head_hidden,)
    shapes["head2_w"] = (a.head_hidden, 1)
    shapes["head2_b"] = (1,)
    return shapes


@dataclass
class LgnModel:
    arch: ArchConfig
    weights: dict[str, np.ndarray]

    @classmethod
    def create(cls, arch: ArchConfig = ArchConfig(), seed: int = 0) -> "LgnModel":
        rng = np.random.default_rng(seed)
        weights = {}
        for name, shape in _weight_shapes(arch).items():
            if name.endswith("_b"):
                weights[name] = np.zeros(shape)
            else:
                fan_in = int(np.prod(shape[:-1]))
                fan_out = shape[-1]
                scale = math.sqrt(2.0 / (fan_in + fan_out))
                weights[name] = rng.normal(0.0, scale, size=shape)
        return cls(arch=arch, weights=weights)

    @classmethod
    def zeros(cls, arch: ArchConfig = ArchConfig()) -> "LgnModel":
        return cls(
            arch=arch,
            weights={n: np.zeros(s) for n, s in _weight_shapes(arch).items()},
        )

    def copy(self) -> "LgnModel":
        return LgnModel(self.arch, {k: v.copy() for k, v in self.weights.items()})

    def zero_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.weights.items()}

    def check_finite(self) -> None:
        for k, v in self.weights.items():
            if not np.isfinite(v).all():
                raise FloatingPointError(f"non-finite weights in {k}")


def _up2(m: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(m, 2, axis=0), 2, axis=1)


def _up2_backward(g: np.ndarray) -> np.ndarray:
    h, w, c = g.shape
    return g.reshape(h // 2, 2, w // 2, 2, c).sum(axis=(1, 3))


@dataclass
class PyramidCache:
    x: np.ndarray
    C: list[np.ndarray]  # bottom-up features (post-tanh; C[0] is the input)
    M: list[np.ndarray] | None  # merged laterals, pyramid variant only
    P: list[np.ndarray]  # output levels, finest first


def build_pyramid(model: LgnModel, x: np.ndarray) -> PyramidCache:
    """Forward the map feature extractor. x is (H, W, Cin), dims % 8 == 0."""
    a = model.arch
    h, w, cin = x.shape
    if cin != a.in_channels:
        raise ValueError(f"expected {a.in_channels} input channels, got {cin}")
    if h % (1 << (a.levels - 1)) or w % (1 << (a.levels - 1)):
        raise ValueError(f"raster dims must be divisible by {1 << (a.levels - 1)}")
    W = model.weights
    C = [x]
    for l in range(1, a.levels):
        z = kernels.conv3x3(C[-1], W[f"bu{l}_w"], W[f"bu{l}_b"], stride=2)
        C.append(np.tanh(z))
    top = a.levels - 1
    if not a.pyramid:
        m = C[top] @ W[f"lat{top}_w"] + W[f"lat{top}_b"]
        p = kernels.conv3x3(m, W[f"smooth{top}_w"], W[f"smooth{top}_b"], stride=1)
        return PyramidCache(x=x, C=C, M=[m], P=[p])
    M: list[np.ndarray | None] = [None] * a.levels
    M[top] = C[top] @ W[f"lat{top}_w"] + W[f"lat{top}_b"]
    for l in range(top - 1, -1, -1):
        M[l] = C[l] @ W[f"lat{l}_w"] + W[f"lat{l}_b"] + _up2(M[l + 1])
    P = [
        kernels.conv3x3(M[l], W[f"smooth{l}_w"], W[f"smooth{l}_b"], stride=1)
        for l in range(a.levels)
    ]
    return PyramidCache(x=x, C=C, M=M, P=P)


def backprop_pyramid(
    model: LgnModel, cache: PyramidCache, dP: list[np.ndarray], grads: dict
) -> None:
    """Accumulate weight gradients given per-level output gradients dP."""
    a = model.arch
    W = model.weights
    top = a.levels - 1
    if not a.pyramid:
        gm, gw, gb = kernels.conv3x3_backward(
            cache.M[0], W[f"smooth{top}_w"], dP[0], stride=1
        )
        grads[f"smooth{top}_w"] += gw
        grads[f"smooth{top}_b"] += gb
        grads[f"lat{top}_w"] += np.einsum("ijc,ijo->co", cache.C[top], gm)
        grads[f"lat{top}_b"] += gm.sum(axis=(0, 1))
        dC = gm @ W[f"lat{top}_w"].T
        _backprop_bottom_up(model, cache, dC, top, grads)
        return

    dM: list[np.ndarray | None] = [None] * a.levels
    for l in range(a.levels):
        gm, gw, gb = kernels.conv3x3_backward(
            cache.M[l], W[f"smooth{l}_w"], dP[l], stride=1
        )
        grads[f"smooth{l}_w"] += gw
        grads[f"smooth{l}_b"] += gb
        dM[l] = gm
    # top-down fusion: M[l] feeds up2 into M[l-1]
    for l in range(1, a.levels):
        dM[l] = dM[l] + _up2_backward(dM[l - 1])
    dC_top = None
    for l in range(a.levels):
        grads[f"lat{l}_w"] += np.einsum("ijc,ijo->co", cache.C[l], dM[l])
        grads[f"lat{l}_b"] += dM[l].sum(axis=(0, 1))
    # bottom-up chain: C[l] receives from lat l and from bu l+1
    dC = [dM[l] @ W[f"lat{l}_w"].T for l in range(a.levels)]
    for l in range(top, 0, -1):
        dZ = dC[l] * (1.0 - cache.C[l] ** 2)
        gx, gw, gb = kernels.conv3x3_backward(cache.C[l - 1], W[f"bu{l}_w"], dZ, stride=2)
        grads[f"bu{l}_w"] += gw
        grads[f"bu{l}_b"] += gb
        dC[l - 1] = dC[l - 1] + gx


def _backprop_bottom_up(model, cache, dC_top, top, grads) -> None:
    W = model.weights
    dC = dC_top
    for l in range(top, 0, -1):
        dZ = dC * (1.0 - cache.C[l] ** 2)
        gx, gw, gb = kernels.conv3x3_backward(cache.C[l - 1], W[f"bu{l}_w"], dZ, stride=2)
        grads[f"bu{l}_w"] += gw
        grads[f"bu{l}_b"] += gb
        dC = gx


def roi_pool(
    cache: PyramidCache, cell: tuple[int, int], k: int
) -> tuple[np.ndarray, list[tuple]]:
    """Average-pool a k x k zero-padded window around the query cell per level.

    Returns the concatenated feature vector and the window metadata needed to
    scatter gradients back.
    """
    r, c = cell
    vecs = []
    meta = []
    half = k // 2
    for idx, p in enumerate(cache.P):
        lvl_shift = _level_shift(cache, idx)
        rl, cl = r >> lvl_shift, c >> lvl_shift
        h, w, f = p.shape
        r0, r1 = max(rl - half, 0), min(rl + half + 1, h)
        c0, c1 = max(cl - half, 0), min(cl + half + 1, w)
        if r0 >= r1 or c0 >= c1:
            vecs.append(np.zeros(f))
            meta.append((idx, 0, 0, 0, 0))
            continue
        window = p[r0:r1, c0:c1]
        vecs.append(window.sum(axis=(0, 1)) / (k * k))
        meta.append((idx, r0, r1, c0, c1))
    return np.concatenate(vecs), meta


def _level_shift(cache: PyramidCache, idx: int) -> int:
    # single-level caches hold only the coarsest map
    if len(cache.P) == 1 and len(cache.C) > 1:
        return len(cache.C) - 1
    return idx


def roi_pool_backward(
    cache: PyramidCache, meta: list[tuple], gvec: np.ndarray, k: int, dP: list[np.ndarray]
) -> None:
    f = cache.P[0].shape[2]
    for j, (idx, r0, r1, c0, c1) in enumerate(meta):
        g = gvec[j * f : (j + 1) * f] / (k * k)
        dP[idx][r0:r1, c0:c1] += g


def _window_bounds(
    cells: np.ndarray, shift: int, k: int, h: int, w: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    half = k // 2
    rl = cells[:, 0] >> shift
    cl = cells[:, 1] >> shift
    r0 = np.clip(rl - half, 0, h)
    r1 = np.clip(rl + half + 1, 0, h)
    c0 = np.clip(cl - half, 0, w)
    c1 = np.clip(cl + half + 1, 0, w)
    return r0, r1, c0, c1


def roi_pool_batch(
    cache: PyramidCache, cells: np.ndarray, k: int
) -> tuple[np.ndarray, list[tuple]]:
    """Vectorized roi_pool for (B, 2) query cells via summed-area tables."""
    cells = np.asarray(cells, dtype=int)
    outs = []
    bounds = []
    for idx, p in enumerate(cache.P):
        h, w, f = p.shape
        shift = _level_shift(cache, idx)
        sat = np.zeros((h + 1, w + 1, f))
        np.cumsum(np.cumsum(p, axis=0), axis=1, out=sat[1:, 1:])
        r0, r1, c0, c1 = _window_bounds(cells, shift, k, h, w)
        sums = sat[r1, c1] - sat[r0, c1] - sat[r1, c0] + sat[r0, c0]
        outs.append(sums / (k * k))
        bounds.append((r0, r1, c0, c1))
    return np.concatenate(outs, axis=1), bounds


def roi_pool_backward_batch(
    cache: PyramidCache,
    bounds: list[tuple],
    gvecs: np.ndarray,
    k: int,
    dP: list[np.ndarray],
) -> None:
    """Adjoint of roi_pool_batch: scatter window-mean gradients into dP."""
    f = cache.P[0].shape[2]
    for idx, (r0, r1, c0, c1) in enumerate(bounds):
        h, w, _ = dP[idx].shape
        g = gvecs[:, idx * f : (idx + 1) * f] / (k * k)
        diff = np.zeros((h + 1, w + 1, f))
        np.add.at(diff, (r0, c0), g)
        np.add.at(diff, (r1, c1), g)
        np.subtract.at(diff, (r0, c1), g)
        np.subtract.at(diff, (r1, c0), g)
        dP[idx] += np.cumsum(np.cumsum(diff[:h, :w], axis=0), axis=1)


def one_hot_relation(relation: str, n: int = len(RELATIONS)) -> np.ndarray:
    if relation not in REL_INDEX:
        raise KeyError(f"unknown relation: {relation}")
    v = np.zeros(n)
    v[REL_INDEX[relation]] = 1.0
    return v


def encode_relation(model: LgnModel, relation: str) -> np.ndarray:
    W = model.weights
    return np.tanh(one_hot_relation(relation) @ W["relenc_w"] + W["relenc_b"])


@dataclass
class HeadCache:
    pooled: np.ndarray
    onehot: np.ndarray
    m: np.ndarray
    r: np.ndarray
    h: np.ndarray
    p: float


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def forward_head(model: LgnModel, pooled: np.ndarray, relation: str) -> HeadCache:
    W = model.weights
    onehot = one_hot_relation(relation)
    m = np.tanh(pooled @ W["mapenc_w"] + W["mapenc_b"])
    r = np.tanh(onehot @ W["relenc_w"] + W["relenc_b"])
    z = np.concatenate([m, r])
    h = np.tanh(z @ W["head1_w"] + W["head1_b"])
    logit = float(h @ W["head2_w"][:, 0] + W["head2_b"][0])
    return HeadCache(pooled=pooled, onehot=onehot, m=m, r=r, h=h, p=_sigmoid(logit))


def backprop_head(
    model: LgnModel, hc: HeadCache, dlogit: float, grads: dict
) -> np.ndarray:
    """Backprop a scalar logit gradient; returns the pooled-vector gradient."""
    W = model.weights
    grads["head2_w"] += np.outer(hc.h, [dlogit])
    grads["head2_b"] += np.array([dlogit])
    dh = dlogit * W["head2_w"][:, 0]
    dz1 = dh * (1.0 - hc.h**2)
    z = np.concatenate([hc.m, hc.r])
    grads["head1_w"] += np.outer(z, dz1)
    grads["head1_b"] += dz1
    dz = W["head1_w"] @ dz1
    dm = dz[: len(hc.m)] * (1.0 - hc.m**2)
    dr = dz[len(hc.m) :] * (1.0 - hc.r**2)
    grads["mapenc_w"] += np.outer(hc.pooled, dm)
    grads["mapenc_b"] += dm
    grads["relenc_w"] += np.outer(hc.onehot, dr)
    grads["relenc_b"] += dr
    return model.weights["mapenc_w"] @ dm


@dataclass
class HeadBatchCache:
    pooled: np.ndarray  # (B, D)
    onehot: np.ndarray  # (B, R)
    m: np.ndarray
    r: np.ndarray
    h: np.ndarray
    p: np.ndarray  # (B,)


def forward_head_batch(
    model: LgnModel, pooled: np.ndarray, onehot: np.ndarray
) -> HeadBatchCache:
    W = model.weights
    m = np.tanh(pooled @ W["mapenc_w"] + W["mapenc_b"])
    r = np.tanh(onehot @ W["relenc_w"] + W["relenc_b"])
    z = np.concatenate([m, r], axis=1)
    h = np.tanh(z @ W["head1_w"] + W["head1_b"])
    logit = h @ W["head2_w"][:, 0] + W["head2_b"][0]
    p = np.where(
        logit >= 0,
        1.0 / (1.0 + np.exp(-np.clip(logit, -500, 500))),
        np.exp(np.clip(logit, -500, 500))
        / (1.0 + np.exp(np.clip(logit, -500, 500))),
    )
    return HeadBatchCache(pooled=pooled, onehot=onehot, m=m, r=r, h=h, p=p)


def backprop_head_batch(
    model: LgnModel, hc: HeadBatchCache, dlogit: np.ndarray, grads: dict
) -> np.ndarray:
    """Vectorized head backprop; returns (B, D) pooled-vector gradients."""
    W = model.weights
    grads["head2_w"] += (hc.h * dlogit[:, None]).sum(axis=0)[:, None]
    grads["head2_b"] += np.array([dlogit.sum()])
    dh = dlogit[:, None] * W["head2_w"][:, 0][None, :]
    dz1 = dh * (1.0 - hc.h**2)
    z = np.concatenate([hc.m, hc.r], axis=1)
    grads["head1_w"] += z.T @ dz1
    grads["head1_b"] += dz1.sum(axis=0)
    dz = dz1 @ W["head1_w"].T
    em = hc.m.shape[1]
    dm = dz[:, :em] * (1.0 - hc.m**2)
    dr = dz[:, em:] * (1.0 - hc.r**2)
    grads["mapenc_w"] += hc.pooled.T @ dm
    grads["mapenc_b"] += dm.sum(axis=0)
    grads["relenc_w"] += hc.onehot.T @ dr
    grads["relenc_b"] += dr.sum(axis=0)
    return dm @ W["mapenc_w"].T


def predict(
    model: LgnModel,
    raster: np.ndarray,
    cell: tuple[int, int],
    relation: str,
    cache: PyramidCache | None = None,
) -> float:
    """p-hat in (0, 1) for one (map, location, relation) query."""
    if cache is None:
        cache = build_pyramid(model, raster)
    pooled, _ = roi_pool(cache, cell, model.arch.roi_k)
    return forward_head(model, pooled, relation).p


def nll(p: float, label: int) -> float:
    """Bernoulli negative log-likelihood."""
    p = min(max(p, 1e-300), 1.0 - 1e-16)
    return -(label * math.log(p) + (1 - label) * math.log(1.0 - p))


@dataclass(frozen=True)
class BatchPoint:
    raster_key: str  # groups points sharing one raster
    cell: tuple[int, int]
    relation: str
    label: int


def batch_gradients(
    model: LgnModel,
    points: list[BatchPoint],
    rasters: dict[str, np.ndarray],
) -> tuple[dict[str, np.ndarray], float]:
    """Exact gradient of the mean NLL over the batch; also returns the loss.

    Points sharing a raster share one pyramid pass. Accumulation order is
    fixed (points in list order within each raster group, groups in first-seen
    order), so results are deterministic.
    """
    if not points:
        raise ValueError("empty batch")
    grads = model.zero_like()
    n = len(points)
    total = 0.0
    groups: dict[str, list[BatchPoint]] = {}
    for pt in points:
        groups.setdefault(pt.raster_key, []).append(pt)
    k = model.arch.roi_k
    n_rel = model.arch.n_relations
    for key, pts in groups.items():
        cache = build_pyramid(model, rasters[key])
        dP = [np.zeros_like(p) for p in cache.P]
        cells = np.array([pt.cell for pt in pts], dtype=int)
        onehot = np.zeros((len(pts), n_rel))
        labels = np.empty(len(pts))
        for i, pt in enumerate(pts):
            onehot[i, REL_INDEX[pt.relation]] = 1.0
            labels[i] = pt.label
        pooled, bounds = roi_pool_batch(cache, cells, k)
        hc = forward_head_batch(model, pooled, onehot)
        p = np.clip(hc.p, 1e-300, 1.0 - 1e-16)
        total += float(-(labels * np.log(p) + (1 - labels) * np.log(1 - p)).sum())
        dlogit = (hc.p - labels) / n
        gpooled = backprop_head_batch(model, hc, dlogit, grads)
        roi_pool_backward_batch(cache, bounds, gpooled, k, dP)
        backprop_pyramid(model, cache, dP, grads)
    for v in grads.values():
        if not np.isfinite(v).all():
            raise FloatingPointError("NaN/Inf in gradients")
    return grads, total / n


# ---------------------------------------------------------------------------
# checkpoints


def save_model(model: LgnModel) -> str:
    doc = {
        "version": 1,
        "arch": asdict(model.arch),
        "weights": {k: v.tolist() for k, v in sorted(model.weights.items())},
    }
    return json.dumps(doc, sort_keys=True)


def load_model(data: str | bytes) -> LgnModel:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != 1:
        raise CheckpointError("unsupported checkpoint version")
    try:
        arch = ArchConfig(**doc["arch"])
        weights = {k: np.asarray(v, dtype=float) for k, v in doc["weights"].items()}
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc
    shapes = _weight_shapes(arch)
    if set(weights) != set(shapes):
        raise CheckpointError("checkpoint weights do not match architecture")
    for k, s in shapes.items():
        if weights[k].shape != s:
            raise CheckpointError(
                f"weight {k}: expected shape {s}, got {weights[k].shape}"
            )
    return LgnModel(arch=arch, weights=weights)
