"""End-to-end acceptance checks, one per subsystem guarantee.

Each test prints a single PASS/FAIL line with the measured value next to its
pinned tolerance, so a full run doubles as a scorecard.
"""

import json
import time

import numpy as np
from scipy import stats

from langground.bayesfilter import (
    DetectionModel,
    entropy,
    init_prior,
    map_estimate,
    prior_from_occupancy,
    sensor_likelihood,
    update_language,
    update_sensor,
)
from langground.cli import main as cli_main
from langground.evalharness import ChanceGrounding, point_nlls
from langground.expert import (
    LikelihoodField,
    RelationParams,
    default_params,
    expert_likelihood_many,
    fit_expert_params,
    ground_field,
)
from langground.maps import load_bundled
from langground.nn.model import (
    ArchConfig,
    BatchPoint,
    LgnModel,
    batch_gradients,
)
from langground.nn.synth import (
    AnnotatedPoint,
    generator_probability,
    random_world_map,
    synthesize_stage1,
    synthesize_stage2,
)
from langground.nn.train import (
    TrainConfig,
    dataset_nll,
    dataset_predictions,
    prepare_rasters,
    train_stage,
)
from langground.parser import SpatialObservation, corpus_accuracy, generate_corpus, parse
from langground.search import (
    MODES,
    NoPath,
    ScenarioConfig,
    dijkstra_costs,
    path_cost,
    plan_path,
    run_batch,
)
from langground.worldmap import GridSpec, load_map, occupancy_grid


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# -- 1. recursive filter equals brute-force Bayes ---------------------------


def test_acceptance_filter_brute_force_equivalence():
    rng = np.random.default_rng(8)
    spec = GridSpec(rows=8, cols=8)
    free = rng.random((8, 8)) > 0.2
    free[0, 0] = True
    b = init_prior(spec, free)
    sensor = DetectionModel(tp=0.8, tn=0.8, range_m=3.0)
    liks = []
    worst = 0.0
    for step in range(6):
        if step % 2 == 0:
            robot = rng.uniform(0, 8, size=2)
            detected = bool(rng.random() < 0.3)
            liks.append(sensor_likelihood(b, robot, detected, sensor))
            b = update_sensor(b, robot, detected, sensor)
        else:
            f = LikelihoodField(
                values=rng.uniform(0.01, 0.99, (8, 8)), relation="near",
                landmark_id="x", spec=spec,
            )
            liks.append(f.values)
            b = update_language(
                b, SpatialObservation("t", "near", "x"), lambda r, l: f
            )
        post = np.where(free, 1.0, 0.0)
        for lik in liks:
            post = post * lik
        post = post / post.sum()
        worst = max(worst, float(np.abs(b.mass - post).max()))
    _report(
        "filter-brute-force", worst < 1e-12,
        f"max |recursive - joint| = {worst:.2e} over 6 updates on 8x8 "
        f"(tolerance 1e-12)",
    )


# -- 2. analytic gradients match finite differences -------------------------


def test_acceptance_gradient_finite_differences():
    t0 = time.time()
    rng = np.random.default_rng(11)
    arch = ArchConfig(feat=3, map_embed=6, rel_embed=4, head_hidden=5)
    model = LgnModel.create(arch, seed=12)
    rasters = {"m": rng.normal(size=(16, 16, 5))}
    points = [
        BatchPoint(
            "m", (int(rng.integers(16)), int(rng.integers(16))), r,
            int(rng.integers(2)),
        )
        for r in ("near", "behind", "at", "around", "far_from", "in_front_of")
    ]
    grads, _ = batch_gradients(model, points, rasters)
    h, worst = 1e-4, 0.0
    for name, w in model.weights.items():
        flat = w.ravel()
        g = grads[name].ravel()
        for i in np.linspace(0, flat.size - 1, min(flat.size, 5)).astype(int):
            orig = flat[i]
            flat[i] = orig + h
            lp = dataset_nll(model, points, rasters)
            flat[i] = orig - h
            lm = dataset_nll(model, points, rasters)
            flat[i] = orig
            fd = (lp - lm) / (2 * h)
            if abs(fd) < 1e-10 and abs(g[i]) < 1e-10:
                continue
            worst = max(worst, abs(g[i] - fd) / (abs(g[i]) + 1e-8))
    dt = time.time() - t0
    _report(
        "gradient-fd", worst < 1e-3 and dt < 60,
        f"worst rel err = {worst:.2e} at h=1e-4 over every weight tensor "
        f"(tolerance 1e-3), {dt:.1f}s (< 60s)",
    )


# -- 3. stage-2 training recovers aleatoric label noise ----------------------


def test_acceptance_stage2_aleatoric_recovery():
    t0 = time.time()
    rng = np.random.default_rng(42)
    maps = [
        random_world_map(rng, f"m{i}", extent=32.0, n_landmarks=(2, 2),
                         size_range=(5.0, 10.0))
        for i in range(2)
    ]
    mb = {m.id: m for m in maps}
    rels = ("near", "far_from", "in_front_of")
    s1 = synthesize_stage1(rng, maps, per_relation=40, relations=rels)
    tr = synthesize_stage2(rng, maps, locations_per_map=500,
                           samples_per_location=8, relations=rels)
    held = synthesize_stage2(rng, maps, locations_per_map=150,
                             samples_per_location=1, relations=rels)
    model = LgnModel.create(ArchConfig(feat=16), seed=1)
    cfg1 = TrainConfig(learning_rate=3e-3, max_epochs=25, patience=10,
                       batch_size=256, seed=0)
    cfg2 = TrainConfig(learning_rate=3e-3, lr_step_epochs=20, max_epochs=120,
                       patience=30, batch_size=256, seed=0)
    r1, b1 = prepare_rasters(mb, s1)
    model, _ = train_stage(model, b1, r1, cfg1, stage=1)
    r2, b2 = prepare_rasters(mb, tr)
    model, _ = train_stage(model, b2, r2, cfg2, stage=2)
    rh, bh = prepare_rasters(mb, held)
    p_hat, nlls = dataset_predictions(model, bh, rh)
    p_gen = np.array([generator_probability(p, mb) for p in held])
    pg = np.clip(p_gen, 1e-12, 1 - 1e-12)
    gen_entropy = float((-(pg * np.log(pg) + (1 - pg) * np.log(1 - pg))).mean())
    diff = abs(float(nlls.mean()) - gen_entropy)
    gap = float(np.abs(p_hat - p_gen).mean())
    _report(
        "stage2-aleatoric", diff <= 0.05 and gap <= 0.08,
        f"held NLL {nlls.mean():.4f} vs generator entropy {gen_entropy:.4f} "
        f"(|diff| {diff:.4f} <= 0.05); mean |p_hat - p_gen| = {gap:.4f} "
        f"<= 0.08; {time.time() - t0:.0f}s",
    )


# -- 4. pyramid beats single-level on multi-scale data ------------------------


def test_acceptance_pyramid_ablation():
    rng = np.random.default_rng(9)
    maps = [
        random_world_map(rng, f"m{i}", extent=32.0, n_landmarks=(2, 3),
                         size_range=(3.0, 14.0))
        for i in range(2)
    ]
    mb = {m.id: m for m in maps}
    rels = ("near", "around")
    s1 = synthesize_stage1(rng, maps, per_relation=40, relations=rels)
    tr = synthesize_stage2(rng, maps, locations_per_map=400,
                           samples_per_location=6, relations=rels)
    held = synthesize_stage2(rng, maps, locations_per_map=200,
                             samples_per_location=1, relations=rels)
    cfg1 = TrainConfig(learning_rate=3e-3, max_epochs=20, patience=10,
                       batch_size=256, seed=0)
    cfg2 = TrainConfig(learning_rate=3e-3, lr_step_epochs=20, max_epochs=80,
                       patience=25, batch_size=256, seed=0)
    results = {}
    for name, pyr in (("pyramid", True), ("single", False)):
        model = LgnModel.create(ArchConfig(feat=16, pyramid=pyr), seed=1)
        r1, b1 = prepare_rasters(mb, s1)
        model, _ = train_stage(model, b1, r1, cfg1, stage=1)
        r2, b2 = prepare_rasters(mb, tr)
        model, _ = train_stage(model, b2, r2, cfg2, stage=2)
        rh, bh = prepare_rasters(mb, held)
        _, nlls = dataset_predictions(model, bh, rh)
        results[name] = nlls
    t = stats.ttest_rel(results["single"], results["pyramid"],
                        alternative="greater")
    ok = results["single"].mean() > results["pyramid"].mean() and t.pvalue < 0.05
    _report(
        "pyramid-ablation", ok,
        f"held NLL single {results['single'].mean():.4f} > pyramid "
        f"{results['pyramid'].mean():.4f}, paired t p = {t.pvalue:.2e} < 0.05",
    )


# -- 5. chance baseline statistics --------------------------------------------


def test_acceptance_chance_statistics():
    n = 10_000
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 2, n)
    wmap = load_bundled("demo")
    points = [
        AnnotatedPoint("demo", "b4", (1.0, 1.0), "near", int(y)) for y in labels
    ]
    p_hat = ChanceGrounding(seed=3).predictions(points, {"demo": wmap})
    nlls = point_nlls(p_hat, labels)
    mean, sd = float(nlls.mean()), float(nlls.std(ddof=1))
    ok = 0.95 <= mean <= 1.05 and 0.9 <= sd <= 1.1
    _report(
        "chance-baseline", ok,
        f"mean NLL = {mean:.4f} in [0.95, 1.05], sd = {sd:.4f} in [0.9, 1.1] "
        f"at n = {n}",
    )


# -- 6. expert parameter recovery by MLE --------------------------------------


def test_acceptance_expert_mle_recovery():
    t0 = time.time()
    doc = {
        "version": 1, "id": "m",
        "extent": {"width": 40.0, "height": 40.0},
        "landmarks": [{
            "id": "b1", "name": "Building 1",
            "polygon": [[3, 3], [13, 3], [13, 13], [3, 13]],
            "entrances": [[8.0, 3.0]],
        }],
    }
    wmap = load_map(json.dumps(doc))
    lm = wmap.landmark("b1")
    true = RelationParams(rho=1.0, tau=3.0)
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 40, size=(5000, 2))
    probs = expert_likelihood_many("near", pts, lm, true)
    labels = (rng.random(5000) < probs).astype(int)
    dataset = [(wmap, "b1", "near", pts[i], int(labels[i])) for i in range(5000)]
    init = dict(default_params())
    init["near"] = RelationParams(rho=0.5, tau=6.0)
    fitted = fit_expert_params(dataset, init=init)["near"]
    dt = time.time() - t0
    rho_err = abs(fitted.rho - true.rho) / true.rho
    tau_err = abs(fitted.tau - true.tau) / true.tau
    ok = rho_err <= 0.10 and tau_err <= 0.15 and dt < 30
    _report(
        "expert-mle", ok,
        f"rho err {rho_err:.3f} <= 0.10, tau err {tau_err:.3f} <= 0.15 "
        f"from 5000 labels in {dt:.1f}s (< 30s)",
    )


# -- 7. A* optimality against Dijkstra ----------------------------------------


def test_acceptance_astar_matches_dijkstra():
    rng = np.random.default_rng(123)
    checked, worst = 0, 0.0
    while checked < 50:
        occ = rng.random((32, 32)) < 0.35
        free = np.argwhere(~occ)
        if len(free) < 2:
            continue
        start = tuple(free[rng.integers(len(free))])
        goal = tuple(free[rng.integers(len(free))])
        oracle = dijkstra_costs(occ, start)[goal]
        try:
            cost = path_cost(plan_path(None, occ, start, goal))
        except NoPath:
            assert not np.isfinite(oracle)
            checked += 1
            continue
        worst = max(worst, abs(cost - oracle))
        checked += 1
    _report(
        "astar-optimal", worst < 1e-9,
        f"50 random 32x32 grids, max |A* - Dijkstra| = {worst:.2e} "
        f"(exact agreement, tolerance 1e-9)",
    )


# -- 8. parser accuracy on the synthetic corpus --------------------------------


def test_acceptance_parser_accuracy():
    lexicon = load_bundled("demo").lexicon()
    noisy = generate_corpus(seed=17, n=1000, lexicon=lexicon, typo_rate=0.325)
    clean = generate_corpus(seed=11, n=400, lexicon=lexicon, typo_rate=0.0)
    acc_noisy = corpus_accuracy(noisy, lexicon)
    acc_clean = corpus_accuracy(clean, lexicon)
    ok = acc_noisy >= 0.97 and acc_clean == 1.0
    _report(
        "parser-accuracy", ok,
        f"accuracy {acc_noisy:.4f} >= 0.97 at 32.5% typo rate (n=1000); "
        f"{acc_clean:.4f} == 1.0 typo-free (n=400)",
    )


# -- 9. search study: collaborative mode wins ----------------------------------

STUDY_MAPS = ("study0", "study1", "study2")
STUDY_BASE_SEED = 2700
STUDY_N = 100
STUDY_CAP = 2000
STUDY_CADENCE = 5
STUDY_NEGATIVE_RATE = 0.9


def _study_configs():
    maps = [load_bundled(name) for name in STUDY_MAPS]
    free_cells = {}
    for m in maps:
        spec = GridSpec.for_map(m, 1.0)
        occ = occupancy_grid(m, spec).astype(bool)
        free_cells[m.id] = np.argwhere(~occ)
    cfgs = []
    for i in range(STUDY_N):
        m = maps[i % len(maps)]
        free = free_cells[m.id]
        r = np.random.default_rng(STUDY_BASE_SEED + i)
        start = tuple(int(v) for v in free[int(r.integers(len(free)))])
        target = tuple(int(v) for v in free[int(r.integers(len(free)))])
        cfgs.append(
            ScenarioConfig(
                wmap=m, seed=STUDY_BASE_SEED + i, start=start, target=target,
                max_steps=STUDY_CAP, human_cadence=STUDY_CADENCE,
                negative_rate=STUDY_NEGATIVE_RATE,
            )
        )
    return cfgs


def test_acceptance_search_study():
    t0 = time.time()
    result = run_batch(_study_configs(), n_workers=8, curve_points=STUDY_CAP)
    hr = result.stats["human-robot"]
    mean_ok = all(
        hr.mean < result.stats[m].mean for m in ("robot-only", "human-only")
    )
    p_ro = result.pairwise_p[("human-robot", "robot-only")]
    p_ho = result.pairwise_p[("human-robot", "human-only")]
    hr_curve = np.asarray(result.curves["human-robot"])
    gaps = {
        m: float(np.min(hr_curve - np.asarray(result.curves[m])))
        for m in MODES if m != "human-robot"
    }
    dominates = all(g >= 0 for g in gaps.values())
    dt = time.time() - t0
    ok = mean_ok and p_ro < 0.05 and p_ho < 0.05 and dominates and dt < 900
    _report(
        "search-study", ok,
        f"mean steps: human-robot {hr.mean:.0f} < robot-only "
        f"{result.stats['robot-only'].mean:.0f} (p={p_ro:.1e}) and < "
        f"human-only {result.stats['human-only'].mean:.0f} (p={p_ho:.1e}), "
        f"both p < 0.05; curve dominance worst gaps "
        f"{ {k: round(v, 3) for k, v in gaps.items()} } all >= 0 at every "
        f"limit 1..{STUDY_CAP}; {STUDY_N} scenarios x 4 modes on "
        f"{len(STUDY_MAPS)} bundled maps in {dt:.0f}s (< 900s)",
    )


# -- 10. three-sentence demo walk-through --------------------------------------


def test_acceptance_demo_sentence_sequence():
    wmap = load_bundled("demo")
    spec = GridSpec.for_map(wmap, 1.0)
    occ = occupancy_grid(wmap, spec)
    params = default_params()

    def grounder(rel, lm):
        return ground_field(rel, lm, wmap, spec, params)

    belief = prior_from_occupancy(spec, occ)
    ents = [entropy(belief)]
    observations = []
    for sentence in (
        "you can find the bag around building 4",
        "the bag is close to building 6",
        "the bag's not in front of building 5",
    ):
        obs = parse(sentence, wmap.lexicon())
        observations.extend(obs)
        belief = update_language(belief, obs, grounder)
        ents.append(entropy(belief))
    decreasing = all(a > b for a, b in zip(ents, ents[1:]))
    rc, _ = map_estimate(belief)
    margins = []
    for o in observations:
        f = ground_field(o.relation, o.landmark_id, wmap, spec, params).values
        margins.append((o.relation, float(f[rc]), float(np.median(f))))
    above = all(v > med for _, v, med in margins)
    _report(
        "demo-sequence", decreasing and above,
        f"entropy {[round(e, 4) for e in ents]} strictly decreasing; "
        f"MAP {tuple(int(v) for v in rc)} grounded-field values vs map "
        f"medians: "
        + ", ".join(f"{r} {v:.3f} > {m:.3f}" for r, v, m in margins),
    )


# -- 11. CLI determinism --------------------------------------------------------


def test_acceptance_cli_determinism(tmp_path):
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps({
        "map": "demo", "seed": 3, "mode": "human-robot", "max_steps": 300,
        "human_cadence": 10,
    }))
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}.json"
        code = cli_main([
            "simulate", "--config", str(cfg), "--seed", "3", "--out", str(out)
        ])
        assert code == 0
        outs.append(out.read_bytes())
    identical = outs[0] == outs[1]
    _report(
        "cli-determinism", identical,
        f"two `simulate --config --seed 3` runs byte-identical "
        f"({len(outs[0])} bytes)",
    )
