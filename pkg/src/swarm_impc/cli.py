"""Command line entry point: gen, run, batch, verify, plot."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import jsonschema

from . import io as run_io
from .batch import BatchSpec, run_batch, write_csv
from .engine import METHODS, EngineConfig, run
from .scenarios import KINDS, PRESETS, Scenario, gen_scenario, preset
from .verification import check_run_collision_free, run_metrics


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def main(verbose: int):
    """Distributed MPC multi-robot planner with deadlock resolution."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--kind", type=click.Choice(KINDS), required=True)
@click.option("--n", "n", type=int, required=True, help="Number of robots.")
@click.option("--preset", "preset_name", type=click.Choice(sorted(PRESETS)), default="2d_crowded",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen(kind, n, preset_name, seed, out):
    """Generate a scenario JSON file."""
    params, ws = preset(preset_name)
    sc = gen_scenario(kind, n, params, ws, seed)
    data = sc.to_dict()
    jsonschema.validate(data, run_io.SCENARIO_SCHEMA)
    Path(out).write_text(json.dumps(data, indent=2))
    click.echo(f"wrote {kind} scenario with {n} robots to {out}")


def _load_scenario(path) -> Scenario:
    data = json.loads(Path(path).read_text())
    jsonschema.validate(data, run_io.SCENARIO_SCHEMA)
    return Scenario.from_dict(data)


@main.command("run")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--method", type=click.Choice(METHODS), default="impc_dr", show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--deadline", type=float, default=50.0, show_default=True)
@click.option("--full-graph", is_flag=True, help="Ignore the communication radius.")
@click.option("--no-resolution", is_flag=True, help="Keep the repulsion adaptation off.")
@click.option("--no-svg", is_flag=True)
def run_cmd(scenario_path, method, out, deadline, full_graph, no_resolution, no_svg):
    """Simulate one scenario and export the log, summary and plot."""
    sc = _load_scenario(scenario_path)
    cfg = EngineConfig(deadline=deadline, comm_radius=float("inf") if full_graph else None,
                       resolution=not no_resolution)
    res = run(sc.starts, sc.targets, sc.params, cfg, method)
    formats = ("jsonl", "json") if no_svg else ("jsonl", "json", "svg")
    run_io.export_run(res, out, formats)
    m = run_metrics(res)
    click.echo(f"{method}: {res.status}; completion {m.completion_time:.2f} s; "
               f"min distance {m.min_continuous_distance:.4f} m; "
               f"deadlock activations {m.deadlock_activations}")


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--full", is_flag=True, help="Use 100 trials per robot count.")
def batch(spec_path, out, full):
    """Run a batch spec and write the per-(method, N) CSV table."""
    data = json.loads(Path(spec_path).read_text())
    if full:
        data["trials"] = 100
    spec = BatchSpec.from_dict(data)
    res = run_batch(spec)
    write_csv(res.rows, out)
    for row in res.rows:
        click.echo(f"{row['method']:8s} N={row['N']:3d} success {row['success_count']}/{row['trials']} "
                   f"infeasible {row['infeasible_count']} mean {row['mean_completion_s']:.2f} s")


@main.command()
@click.option("--run", "run_dir", type=click.Path(exists=True, file_okay=False), required=True)
def verify(run_dir):
    """Re-check an exported run: schema, continuous collision test and metrics."""
    run_io.validate_log(Path(run_dir) / run_io.LOG_NAME)
    res = run_io.load_run(run_dir)
    coll = check_run_collision_free(res)
    m = run_metrics(res)
    stored = json.loads((Path(run_dir) / run_io.SUMMARY_NAME).read_text())["metrics"]
    same = run_io._jsonable(m.to_dict()) == stored
    click.echo(f"collision-free: {coll.passed} (min {coll.min_distance:.6f} m)")
    click.echo(f"success: {m.success}; completion {m.completion_time:.2f} s")
    click.echo(f"metrics match summary: {same}")
    if not (coll.passed and same):
        sys.exit(1)


@main.command()
@click.option("--run", "run_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def plot(run_dir, out):
    """Draw the executed xy paths of an exported run."""
    from .plot import plot_paths

    res = run_io.load_run(run_dir)
    plot_paths(res.positions, res.targets, out, title=f"{res.method}: {res.status}",
               r_min=res.params.r_min)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
