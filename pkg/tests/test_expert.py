import json

import numpy as np
import pytest

from langground.expert import (
    ChanceModel,
    DegenerateDataset,
    RelationParams,
    chance_likelihood,
    default_params,
    expert_likelihood,
    expert_likelihood_many,
    fit_expert_params,
    ground_field,
    load_params,
    save_params,
)
from langground.worldmap import GridSpec, load_map


def make_map(entrances=(((8.0, 3.0)),)):
    doc = {
        "version": 1,
        "id": "m",
        "extent": {"width": 40.0, "height": 40.0},
        "landmarks": [
            {
                "id": "b1",
                "name": "Building 1",
                "polygon": [[3, 3], [13, 3], [13, 13], [3, 13]],
                "entrances": [list(e) for e in entrances],
            }
        ],
    }
    return load_map(json.dumps(doc))


def test_far_from_is_complement_of_near_form():
    wmap = make_map()
    lm = wmap.landmark("b1")
    p = RelationParams(rho=1.0, tau=3.0)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 40, size=(200, 2))
    near = expert_likelihood_many("near", pts, lm, p, clamp=False)
    far = expert_likelihood_many("far_from", pts, lm, p, clamp=False)
    assert np.allclose(near + far, 1.0)


def test_near_value_at_rho_diameter_is_half():
    # 10 m square: diameter = 10*sqrt(2); pick x at d = rho*D outside
    wmap = make_map()
    lm = wmap.landmark("b1")
    p = RelationParams(rho=1.0, tau=2.0)
    d_target = p.rho * lm.diameter()
    x = (13.0 + d_target, 8.0)  # east of the east edge, distance exact
    v = expert_likelihood("near", x, lm, wmap, p, clamp=False)
    assert v == pytest.approx(0.5, abs=1e-9)


def test_front_on_entrance_normal_ray():
    wmap = make_map(entrances=[(8.0, 3.0)])  # south edge, normal (0,-1)
    lm = wmap.landmark("b1")
    p = RelationParams(rho=1.0, tau=3.0, kappa=2.0)
    D = lm.diameter()
    x = np.array([8.0, 3.0]) + np.array([0.0, -1.0]) * 0.1 * D
    v = expert_likelihood("in_front_of", x, lm, wmap, p, clamp=False)
    # cos(theta) = 1 on the ray: angular factor is 1, proximity term alone
    from langground.geometry import signed_distance

    d = signed_distance(x, lm.polygon)
    prox = 1.0 / (1.0 + np.exp(-(p.rho * D - d) / p.tau))
    assert v == pytest.approx(prox, abs=1e-12)


def test_behind_is_front_with_negated_directions():
    wmap = make_map(entrances=[(8.0, 3.0)])
    lm = wmap.landmark("b1")
    p = RelationParams(rho=1.0, tau=3.0, kappa=2.0)
    south = (8.0, 1.0)
    north = (8.0, 15.0)
    front = expert_likelihood("in_front_of", south, lm, wmap, p)
    back = expert_likelihood("behind", north, lm, wmap, p)
    assert front == pytest.approx(back, abs=1e-9)
    assert expert_likelihood("in_front_of", north, lm, wmap, p) < front


def test_no_entrance_fallback():
    wmap = make_map(entrances=[])
    lm = wmap.landmark("b1")
    p = RelationParams(rho=1.0, tau=3.0, kappa=2.0)
    x = (20.0, 8.0)
    assert expert_likelihood("in_front_of", x, lm, wmap, p) == pytest.approx(
        expert_likelihood("near", x, lm, wmap, p)
    )


def test_at_interior_pinned():
    wmap = make_map()
    lm = wmap.landmark("b1")
    p = RelationParams(rho=0.25, tau=1.0)
    assert expert_likelihood("at", (8.0, 8.0), lm, wmap, p) == pytest.approx(0.99)


def test_around_ring():
    wmap = make_map()
    lm = wmap.landmark("b1")
    p = RelationParams(rho=1.0, tau=2.0, width=4.0)
    on_ring = expert_likelihood("around", (17.0, 8.0), lm, wmap, p, clamp=False)
    assert on_ring == pytest.approx(1.0)
    inside = expert_likelihood("around", (8.0, 8.0), lm, wmap, p, clamp=False)
    assert inside == pytest.approx(p.floor)


def test_monotonic_in_distance_for_proximity_relations():
    wmap = make_map()
    lm = wmap.landmark("b1")
    params = default_params()
    xs = [(13.0 + d, 8.0) for d in np.linspace(0.5, 25.0, 40)]
    for rel in ("near", "close_to", "by", "next_to", "beside"):
        vals = [expert_likelihood(rel, x, lm, wmap, params[rel]) for x in xs]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


def test_rigid_transform_invariance():
    wmap = make_map()
    lm = wmap.landmark("b1")
    p = RelationParams(rho=1.0, tau=3.0, kappa=2.0)
    from langground.worldmap import transform_point, transform_world_map

    x = np.array([20.0, 6.0])
    v0 = expert_likelihood("in_front_of", x, lm, wmap, p)
    for k in (1, 2, 3):
        wm2 = transform_world_map(wmap, k_rot=k)
        x2 = transform_point(x, wmap, k_rot=k)
        v1 = expert_likelihood("in_front_of", x2, wm2.landmark("b1"), wm2, p)
        assert v1 == pytest.approx(v0, abs=1e-9)


def test_values_clamped():
    wmap = make_map()
    lm = wmap.landmark("b1")
    params = default_params()
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 40, size=(300, 2))
    for rel, p in params.items():
        v = expert_likelihood_many(rel, pts, lm, p)
        assert (v >= p.floor - 1e-15).all() and (v <= 1 - p.floor + 1e-15).all()


def test_ground_field_shape_and_complement():
    wmap = make_map()
    spec = GridSpec.for_map(wmap)
    p = default_params()
    f_near = ground_field("near", "b1", wmap, spec, p)
    assert f_near.values.shape == (spec.rows, spec.cols)
    # complement holds pre-clamp on free cells with shared params
    lm = wmap.landmark("b1")
    pts = spec.cell_centers()
    near_raw = expert_likelihood_many("near", pts, lm, p["near"], clamp=False)
    far_raw = expert_likelihood_many("far_from", pts, lm, p["near"], clamp=False)
    assert np.allclose(near_raw + far_raw, 1.0)


def test_front_field_multimodal_with_three_entrances():
    wmap = make_map(entrances=[(8.0, 3.0), (13.0, 8.0), (8.0, 13.0)])
    spec = GridSpec.for_map(wmap)
    p = {"in_front_of": RelationParams(rho=0.6, tau=1.5, kappa=8.0)}
    p.update({k: v for k, v in default_params().items() if k != "in_front_of"})
    fld = ground_field("in_front_of", "b1", wmap, spec, p).values
    # exhaustive 8-neighbour local-maximum scan
    n_max = 0
    for r in range(1, spec.rows - 1):
        for c in range(1, spec.cols - 1):
            w = fld[r - 1 : r + 2, c - 1 : c + 2]
            if fld[r, c] == w.max() and fld[r, c] > np.median(fld):
                n_max += 1
    assert n_max >= 2


def test_params_checkpoint_roundtrip():
    p = default_params()
    text = save_params(p)
    again = load_params(text)
    assert again == p


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        RelationParams(rho=1.0, tau=-1.0).validate()
    with pytest.raises(ValueError):
        RelationParams(rho=0.0, tau=1.0).validate()


def test_fit_recovers_near_params():
    wmap = make_map()
    lm = wmap.landmark("b1")
    true = RelationParams(rho=1.0, tau=3.0)
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 40, size=(5000, 2))
    probs = expert_likelihood_many("near", pts, lm, true)
    labels = (rng.random(5000) < probs).astype(int)
    dataset = [
        (wmap, "b1", "near", pts[i], int(labels[i])) for i in range(len(pts))
    ]
    init = dict(default_params())
    init["near"] = RelationParams(rho=0.5, tau=6.0)
    fitted = fit_expert_params(dataset, init=init)["near"]
    assert abs(fitted.rho - true.rho) / true.rho <= 0.10
    assert abs(fitted.tau - true.tau) / true.tau <= 0.15


def test_fit_rejects_single_class():
    wmap = make_map()
    dataset = [(wmap, "b1", "near", np.array([5.0, 5.0]), 1)] * 10
    with pytest.raises(DegenerateDataset):
        fit_expert_params(dataset)


def test_chance_statistics():
    rng = np.random.default_rng(9)
    draws = np.array([chance_likelihood(rng) for _ in range(100_000)])
    assert ((draws > 0) & (draws < 1)).all()
    mean_nll = float(-np.log(draws).mean())
    assert 0.98 <= mean_nll <= 1.02


def test_chance_reproducible():
    m1, m2 = ChanceModel(seed=4), ChanceModel(seed=4)
    assert [m1.likelihood() for _ in range(5)] == [m2.likelihood() for _ in range(5)]
