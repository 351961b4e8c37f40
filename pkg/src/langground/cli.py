"""Command-line entry points: data synthesis, training, evaluation,
scenario simulation, batch studies, and the session service.

Exit codes: 0 success, 1 usage error, 2 runtime error. All outputs are
deterministic for a fixed seed (sorted JSON keys, no timestamps).
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import maps as bundled_maps
from .evalharness import ChanceGrounding, ExpertGrounding, LgnGrounding, eval_nll
from .expert import fit_expert_params, save_params
from .nn.model import ArchConfig, LgnModel, load_model, save_model
from .nn.synth import (
    AnnotatedPoint,
    random_world_map,
    synthesize_stage1,
    synthesize_stage2,
)
from .nn.train import TrainConfig, train_curriculum
from .parser import generate_corpus
from .search import (
    MODES,
    ScenarioConfig,
    run_batch,
    run_scenario,
)
from .worldmap import GridSpec, WorldMap, dump_map, load_map, occupancy_grid


def _dump_json(obj, path: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is None or path == "-":
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text)


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    return json.loads(p.read_text())


def _load_dataset(path: str) -> tuple[list[AnnotatedPoint], dict[str, WorldMap]]:
    doc = _read_json(path)
    maps = {}
    for m in doc.get("maps", []):
        wm = load_map(m)
        maps[wm.id] = wm
    points = [AnnotatedPoint.from_dict(d) for d in doc.get("points", [])]
    return points, maps


def _resolve_map(spec) -> WorldMap:
    if isinstance(spec, str):
        return bundled_maps.load_bundled(spec)
    return load_map(spec)


def _pick_free_cell(occ: np.ndarray, rng: np.random.Generator) -> tuple[int, int]:
    free = np.argwhere(~occ)
    return tuple(int(v) for v in free[int(rng.integers(len(free)))])


@click.group()
def cli():
    """Spatial-language target search toolkit."""


@cli.command("gen-data")
@click.option("--kind", type=click.Choice(["stage1", "stage2", "corpus"]), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--maps", "n_maps", type=int, default=2, show_default=True,
              help="number of random maps to synthesize")
@click.option("--per-relation", type=int, default=40, show_default=True,
              help="stage1: points per relation per map")
@click.option("--locations", type=int, default=150, show_default=True,
              help="stage2: locations per map")
@click.option("--samples", type=int, default=5, show_default=True,
              help="stage2: label draws per location")
@click.option("--n", "n_sentences", type=int, default=200, show_default=True,
              help="corpus: number of sentences")
@click.option("--map", "map_name", default="demo", show_default=True,
              help="corpus: bundled map supplying the lexicon")
@click.option("--out", default="-", show_default=True)
def gen_data(kind, seed, n_maps, per_relation, locations, samples,
             n_sentences, map_name, out):
    """Synthesize training/evaluation data."""
    if kind == "corpus":
        lexicon = bundled_maps.load_bundled(map_name).lexicon()
        records = generate_corpus(seed, n_sentences, lexicon)
        _dump_json({"records": [r.as_dict() for r in records]}, out)
        return
    rng = np.random.default_rng(seed)
    wmaps = [random_world_map(rng, f"m{i}") for i in range(n_maps)]
    if kind == "stage1":
        points = synthesize_stage1(rng, wmaps, per_relation=per_relation)
    else:
        points = synthesize_stage2(
            rng, wmaps, locations_per_map=locations, samples_per_location=samples
        )
    _dump_json(
        {
            "maps": [json.loads(dump_map(m)) for m in wmaps],
            "points": [p.as_dict() for p in points],
        },
        out,
    )


@cli.command()
@click.option("--data", "data_paths", multiple=True, required=True,
              help="stage dataset files in curriculum order (repeatable)")
@click.option("--out", required=True, help="checkpoint output path")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--feat", type=int, default=16, show_default=True)
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--lr", type=float, default=5e-5, show_default=True)
@click.option("--batch-size", type=int, default=64, show_default=True)
@click.option("--patience", type=int, default=20, show_default=True)
@click.option("--single-level", is_flag=True, help="disable the feature pyramid")
def train(data_paths, out, seed, feat, epochs, lr, batch_size, patience,
          single_level):
    """Train grounding stages in order, carrying weights forward."""
    stages = []
    maps: dict[str, WorldMap] = {}
    for path in data_paths:
        points, stage_maps = _load_dataset(path)
        stages.append(points)
        maps.update(stage_maps)
    if not maps:
        raise click.ClickException("no maps found in any dataset file")
    arch = ArchConfig(feat=feat, pyramid=not single_level)
    model = LgnModel.create(arch, seed=seed)
    cfg = TrainConfig(
        learning_rate=lr, max_epochs=epochs, batch_size=batch_size,
        patience=patience, seed=seed,
    )
    model, logs = train_curriculum(model, stages, maps, cfg)
    Path(out).write_text(save_model(model))
    last = logs[-1]
    click.echo(
        json.dumps(
            {"epochs": len(logs), "final_val_nll": last.val_nll},
            sort_keys=True,
        )
    )


@cli.command("eval-nll")
@click.option("--model", "model_spec", required=True,
              help="'chance', 'expert', or a checkpoint path")
@click.option("--data", "data_path", default=None,
              help="dataset file; omitted for --model chance with --n")
@click.option("--n", "n_points", type=int, default=None,
              help="chance only: number of synthetic points")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default="-", show_default=True)
def eval_nll_cmd(model_spec, data_path, n_points, seed, out):
    """Evaluate a grounding model's negative log-likelihood."""
    if data_path is not None:
        points, maps = _load_dataset(data_path)
    elif model_spec == "chance" and n_points is not None:
        rng = np.random.default_rng(seed)
        wmap = random_world_map(rng, "evalmap", n_landmarks=(3, 4))
        lm = wmap.landmarks[0].id
        points = [
            AnnotatedPoint(
                wmap.id, lm, (float(x), float(y)), "near", int(label), "synthetic"
            )
            for x, y, label in zip(
                rng.uniform(0, wmap.width, n_points),
                rng.uniform(0, wmap.height, n_points),
                rng.integers(0, 2, n_points),
            )
        ]
        maps = {wmap.id: wmap}
    else:
        raise click.UsageError("provide --data, or --n with --model chance")

    if model_spec == "chance":
        grounding = ChanceGrounding(seed=seed)
    elif model_spec == "expert":
        grounding = ExpertGrounding()
    else:
        p = Path(model_spec)
        if not p.exists():
            raise FileNotFoundError(f"checkpoint not found: {p}")
        grounding = LgnGrounding(load_model(p.read_text()))

    report = eval_nll(grounding, points, maps)
    _dump_json(
        {
            "mean": float(report.mean),
            "sd": float(report.sd),
            "n": len(points),
            "overflow": int(report.overflow),
            "per_relation": {
                k: {"mean": float(v[0]), "n": int(v[1])} for k, v in report.per_relation.items()
            },
            "histogram": report.histogram_rows(),
        },
        out,
    )


@cli.command("fit-expert")
@click.option("--data", "data_path", required=True, help="dataset file")
@click.option("--out", default="-", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="unused; accepted for interface uniformity")
def fit_expert(data_path, out, seed):
    """Fit expert-model relation parameters to labeled points."""
    points, maps = _load_dataset(data_path)
    rows = [
        (maps[p.map_id], p.landmark_id, p.relation, np.array(p.location), p.label)
        for p in points
    ]
    params = fit_expert_params(rows)
    text = save_params(params)
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


def _scenario_from_doc(doc: dict, mode=None, seed=None) -> ScenarioConfig:
    wmap = _resolve_map(doc["map"])
    seed = seed if seed is not None else int(doc.get("seed", 0))
    spec = GridSpec.for_map(wmap, float(doc.get("resolution", 1.0)))
    occ = occupancy_grid(wmap, spec).astype(bool)
    rng = np.random.default_rng(seed)
    start = tuple(doc["start"]) if "start" in doc else _pick_free_cell(occ, rng)
    target = tuple(doc["target"]) if "target" in doc else _pick_free_cell(occ, rng)
    return ScenarioConfig(
        wmap=wmap,
        seed=seed,
        start=start,
        target=target,
        mode=mode or doc.get("mode", "human-robot"),
        max_steps=int(doc.get("max_steps", 10000)),
        resolution=float(doc.get("resolution", 1.0)),
        human_cadence=int(doc.get("human_cadence", 20)),
        negative_rate=float(doc.get("negative_rate", 0.5)),
        target_noun=doc.get("target_noun", "bag"),
    )


def _result_dict(cfg: ScenarioConfig, result) -> dict:
    return {
        "map": cfg.wmap.id,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "success": result.success,
        "steps": result.steps,
        "final_cell": [int(result.final_cell[0]), int(result.final_cell[1])],
        "entropy_trace": result.entropy_trace,
        "events": result.events,
    }


@cli.command()
@click.option("--config", "config_path", required=True, help="scenario file")
@click.option("--mode", type=click.Choice(MODES), default=None,
              help="override the config's mode")
@click.option("--seed", type=int, default=None, help="override the config's seed")
@click.option("--out", default="-", show_default=True)
def simulate(config_path, mode, seed, out):
    """Run one search scenario to success or the step cap."""
    cfg = _scenario_from_doc(_read_json(config_path), mode=mode, seed=seed)
    result = run_scenario(cfg)
    _dump_json(_result_dict(cfg, result), out)


@cli.command()
@click.option("--config-dir", required=True,
              help="directory of scenario files (*.json)")
@click.option("--out-dir", required=True)
@click.option("--seed", type=int, default=None, help="override every scenario seed")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--curve-points", type=int, default=40, show_default=True)
def batch(config_dir, out_dir, seed, workers, curve_points):
    """Run every scenario in a directory across all four modes."""
    cdir = Path(config_dir)
    if not cdir.is_dir():
        raise FileNotFoundError(f"config directory not found: {cdir}")
    files = sorted(cdir.glob("*.json"))
    if len(files) < 2:
        raise click.ClickException(f"need at least 2 scenario files in {cdir}")
    cfgs = [
        _scenario_from_doc(_read_json(str(f)), seed=seed) for f in files
    ]
    result = run_batch(cfgs, n_workers=workers, curve_points=curve_points)
    odir = Path(out_dir)
    odir.mkdir(parents=True, exist_ok=True)
    metrics = {
        "modes": {
            m: {
                "mean_steps": float(s.mean),
                "sd_steps": float(s.sd),
                "successes": int(s.successes),
                "n": len(s.steps),
            }
            for m, s in result.stats.items()
        },
        "pairwise_p": {f"{a}|{b}": float(p) for (a, b), p in result.pairwise_p.items()},
    }
    _dump_json(metrics, str(odir / "metrics.json"))
    lines = ["step_limit\t" + "\t".join(result.modes)]
    for i, lim in enumerate(result.limits):
        row = [str(int(lim))] + [
            repr(float(result.curves[m][i])) for m in result.modes
        ]
        lines.append("\t".join(row))
    (odir / "curves.tsv").write_text("\n".join(lines) + "\n")
    click.echo(f"wrote {odir / 'metrics.json'} and {odir / 'curves.tsv'}")


@cli.command()
@click.option("--host", default=None, help="bind address (env LANGGROUND_HOST)")
@click.option("--port", type=int, default=None, help="bind port (env LANGGROUND_PORT)")
def serve(host, port):
    """Start the session service."""
    import uvicorn

    from .service import create_app

    host = host or os.environ.get("LANGGROUND_HOST", "127.0.0.1")
    port = port if port is not None else int(os.environ.get("LANGGROUND_PORT", "8000"))
    uvicorn.run(create_app(), host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures: missing files, bad data, ...
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
