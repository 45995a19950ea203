"""Command-line entry point: ``aerial-irs run | sweep-tirs-angle | tradeoff | validate-config``."""
from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .experiments import load_experiment, run_experiment, tradeoff_sweep
from .baselines import tirs_angle_sweep
from .scenario import ConfigError, ScenarioConfig, load_config


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from exc


def _scenario(path: str | None) -> ScenarioConfig:
    return load_config(path) if path else ScenarioConfig()


def _write_table(rows: list[dict], out: Path, name: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{name}.csv"
    with open(target, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return target


@click.group()
def main():
    """Sum-rate experiments for UAV-mounted and terrestrial reflecting surfaces."""


@main.command()
@click.argument("spec_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the experiment file's base seed.")
@click.option("--trials", type=int, default=None, help="Override the number of trials.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Override the output directory.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Concurrent trial workers.")
@click.option("--timing/--no-timing", default=True, show_default=True,
              help="Record wall time; --no-timing writes 0 so reruns are byte-identical.")
def run(spec_path, seed, trials, out, jobs, timing):
    """Run the experiment described by SPEC_PATH (TOML)."""
    try:
        spec = load_experiment(spec_path, base_seed=seed, n_trials=trials, output_dir=out)
    except (ConfigError, TypeError) as exc:
        raise click.ClickException(str(exc)) from exc
    result = run_experiment(spec, jobs=jobs, timing=timing)
    for cell in result.summary["cells"]:
        click.echo(f"{cell['scheme']:>18} {str(cell['sweep_value']):>8} "
                   f"{cell['mean_sum_rate_mbps']:10.3f} +- {cell['stderr_mbps']:.3f} Mbps (n={cell['n_trials']})")
    click.echo(f"wrote {Path(spec.output_dir) / (spec.experiment_id + '.csv')}")
    sys.exit(0 if result.all_optimal else 1)


@main.command("sweep-tirs-angle")
@click.option("--angles", default="30,45,60,75", show_default=True, help="Angles in degrees.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default="results", show_default=True)
@click.option("--no-phase", is_flag=True, help="Keep the reflection vector at identity.")
def sweep_tirs_angle(angles, config_path, seed, trials, out, no_phase):
    """Mean sum rate of the terrestrial surface versus its placement angle."""
    rows = tirs_angle_sweep(_scenario(config_path), _floats(angles), trials, seed, no_phase=no_phase)
    for r in rows:
        click.echo(f"{r['angle_deg']:6.1f} deg  {r['mean_sum_rate_mbps']:10.3f} +- {r['stderr_mbps']:.3f} Mbps")
    click.echo(f"wrote {_write_table(rows, Path(out), 'tirs_angle')}")


@main.command()
@click.option("--altitudes", default="30,40,50,60,70,80,90,100,110,120", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trials", type=int, default=5, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default="results", show_default=True)
def tradeoff(altitudes, config_path, seed, trials, out):
    """Path-loss versus radiation-pattern terms and sum rate over pinned altitudes."""
    try:
        rows = tradeoff_sweep(_scenario(config_path), _floats(altitudes), trials, seed)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    for r in rows:
        click.echo(f"h={r['h_uav']:6.1f}  F_PL={r['f_pl']:.4e}  F_Ra={r['f_ra']:.4e}  "
                   f"{r['mean_sum_rate_mbps']:10.3f} Mbps")
    click.echo(f"wrote {_write_table(rows, Path(out), 'tradeoff')}")


@main.command("validate-config")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def validate_config(path):
    """Check a scenario or experiment TOML file."""
    import tomli

    with open(path, "rb") as fh:
        try:
            data = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise click.ClickException(f"not valid TOML: {exc}") from exc
    try:
        if "experiment_id" in data:
            spec = load_experiment(path)
            click.echo(json.dumps({"experiment": spec.experiment_id, "cells": len(spec.values) * len(spec.schemes),
                                   "trials": spec.n_trials}))
        else:
            cfg = load_config(path)
            click.echo(json.dumps({"scenario": "ok", "n_ues": cfg.n_ues, "n_irs_elements": cfg.n_irs_elements}))
    except (ConfigError, TypeError) as exc:
        raise click.ClickException(str(exc)) from exc


if __name__ == "__main__":
    main()
