"""Command-line interface for the contour-comparison pipeline."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import contour as contour_mod
from . import dependence as dep
from .decluster import DeclusterConfig, decluster
from .ingest import load_csv, write_csv, write_gap_report
from .metamodel import MetaModelParams
from .pipeline import (
    MODEL_NAMES,
    default_synthesis_config,
    default_synthetic_params,
    fit_all_models,
    load_study_config,
    run_study,
    study_config_from_dict,
)


@click.group()
def main():
    """Environmental contours and multivariate extreme-value comparison."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML synthesis config; default is the documented 10-year study setup.")
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--years", type=float, default=10.0, show_default=True)
def synth(config_path, seed, out_path, years):
    """Generate a synthetic dataset and write it to CSV."""
    from .ingest import MarginalSpec, SynthesisConfig, generate_synthetic_dataset

    if config_path:
        with open(config_path) as fh:
            doc = yaml.safe_load(fh)
        doc["marginals"] = {
            k: MarginalSpec(v["dist"], v["params"]) for k, v in doc["marginals"].items()
        }
        if doc.get("correlation") is not None:
            doc["correlation"] = np.asarray(doc["correlation"], dtype=float)
        cfg = SynthesisConfig(**doc)
    else:
        cfg = default_synthesis_config(years)
    ds = generate_synthetic_dataset(cfg, seed)
    write_csv(ds, out_path)
    write_gap_report(ds, str(out_path) + ".gaps.json")
    click.echo(f"wrote {len(ds)} records to {out_path}")


def _load_events(csv_path, schema_path, variable, threshold_quantile, separation):
    with open(schema_path) as fh:
        schema = yaml.safe_load(fh)
    ds = load_csv(csv_path, schema)
    cfg = DeclusterConfig(
        storm_threshold_quantile=threshold_quantile, separation_hours=separation
    )
    return ds, decluster(ds, variable, cfg)


@main.command("fit-margins")
@click.option("--csv", "csv_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), required=True)
@click.option("--variables", default="hs,ws,cs", show_default=True)
@click.option("--event-variable", default="hs", show_default=True)
@click.option("--storm-quantile", type=float, default=0.975, show_default=True)
@click.option("--separation-hours", type=float, default=48.0, show_default=True)
@click.option("--gpd-quantile", type=float, default=0.99, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
def fit_margins_cmd(csv_path, schema_path, variables, event_variable, storm_quantile,
                    separation_hours, gpd_quantile, out_dir):
    """Decluster and fit semi-parametric GPD margins; write margins.json and events.csv."""
    variables = variables.split(",")
    ds, events = _load_events(csv_path, schema_path, event_variable, storm_quantile,
                              separation_hours)
    margins = dep.fit_margins(
        events, variables, threshold_quantile=gpd_quantile,
        reference={v: ds.columns[v][np.isfinite(ds.columns[v])] for v in variables},
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "margins.json", "w") as fh:
        json.dump(dep.margins_to_dict(margins), fh, sort_keys=True)
    events.to_csv(out / "events.csv")
    for m, v in zip(margins.margins, variables):
        click.echo(
            f"{v}: u={m.gpd.threshold:.3f} sigma={m.gpd.scale:.3f} "
            f"xi={m.gpd.shape:.3f} n={m.gpd.n_exceedances}"
        )


@main.command("fit-dependence")
@click.option("--csv", "csv_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), required=True)
@click.option("--margins", "margins_path", type=click.Path(exists=True), required=True)
@click.option("--model", type=click.Choice(["all"] + MODEL_NAMES),
              default="all", show_default=True)
@click.option("--event-variable", default="hs", show_default=True)
@click.option("--storm-quantile", type=float, default=0.975, show_default=True)
@click.option("--separation-hours", type=float, default=48.0, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
def fit_dependence_cmd(csv_path, schema_path, margins_path, model, event_variable,
                       storm_quantile, separation_hours, out_dir):
    """Fit dependence model(s) on the joint storm sample."""
    from .pipeline import StudyConfig

    with open(margins_path) as fh:
        margins = dep.margins_from_dict(json.load(fh))
    _, events = _load_events(csv_path, schema_path, event_variable, storm_quantile,
                             separation_hours)
    names = list(MODEL_NAMES) if model == "all" else [model]
    cfg = StudyConfig(seed=0, out_dir=out_dir, models=names)
    models = fit_all_models(events, margins, cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, m in models.items():
        dep.save_model(m, out / f"model_{name}.json")
        click.echo(f"wrote model_{name}.json")


@main.command("simulate")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--margins", "margins_path", type=click.Path(exists=True), required=True)
@click.option("--n", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def simulate_cmd(model_path, margins_path, n, seed, out_path):
    """Simulate cluster-maxima vectors from a fitted model to CSV."""
    import pandas as pd

    with open(margins_path) as fh:
        margins = dep.margins_from_dict(json.load(fh))
    model = dep.load_model(model_path)
    sim = dep.simulate(model, margins, n, seed)
    df = pd.DataFrame(sim.values, columns=sim.variables)
    df.to_csv(out_path, index=False, float_format="%.17g")
    click.echo(f"wrote {n} events (rate {sim.events_per_year:.3f}/yr) to {out_path}")


@main.command("contour")
@click.option("--events", "events_path", type=click.Path(exists=True), required=True,
              help="CSV of simulated or observed event vectors.")
@click.option("--rate", type=float, required=True, help="Events per year of the sample.")
@click.option("--return-period", type=float, default=100.0, show_default=True)
@click.option("--grid-resolution", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
def contour_cmd(events_path, rate, return_period, grid_resolution, out_path):
    """Build the Huseby contour surface from an event CSV."""
    import pandas as pd

    df = pd.read_csv(events_path)
    variables = [c for c in df.columns if c != "peak_time"]
    sim = dep.SimulatedEvents(
        values=df[variables].to_numpy(dtype=float),
        variables=variables,
        events_per_year=rate,
    )
    grid = contour_mod.make_grid(len(variables), grid_resolution)
    surface = contour_mod.build_contour(sim, grid, return_period)
    surface.save(out_path)
    click.echo(f"wrote surface with {len(surface.vertices)} vertices to {out_path}")


@main.command("design-point")
@click.option("--surface", "surface_path", type=click.Path(exists=True), required=True)
@click.option("--params", "params_path", type=click.Path(exists=True), default=None,
              help="Meta-model params JSON; default documented synthetic coefficients.")
@click.option("--heading", type=float, default=45.0, show_default=True,
              help="Fixed heading (deg) for dm, wdir and cdir.")
def design_point_cmd(surface_path, params_path, heading):
    """Locate the meta-model design point on a contour surface."""
    with open(surface_path) as fh:
        surface = contour_mod.ContourSurface.from_dict(json.load(fh))
    params = (
        MetaModelParams.from_json(params_path) if params_path else default_synthetic_params()
    )
    dp = contour_mod.find_design_point(
        surface, params, {"dm": heading, "wdir": heading, "cdir": heading}
    )
    click.echo(json.dumps({
        "response_kn": dp.response,
        "location": {v: float(x) for v, x in zip(surface.variables or
                     [f"x{i}" for i in range(len(dp.location))], dp.location)},
    }, sort_keys=True))


@main.command("study")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--out-dir", type=click.Path(), default=None, help="Overrides the config out_dir.")
def study_cmd(config_path, seed, out_dir):
    """Run the full comparison study from a declarative config."""
    if config_path:
        cfg = load_study_config(config_path)
        if seed is not None:
            cfg.seed = seed
        if out_dir is not None:
            cfg.out_dir = out_dir
    else:
        if seed is None or out_dir is None:
            raise click.UsageError("--seed and --out-dir required without --config")
        cfg = study_config_from_dict({"seed": seed, "out_dir": out_dir})
    report = run_study(cfg)
    click.echo(open(Path(cfg.out_dir) / "report.txt").read())


if __name__ == "__main__":
    sys.exit(main())
