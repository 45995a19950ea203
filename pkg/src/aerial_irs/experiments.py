"""Monte-Carlo sweeps over scenario parameters and schemes, with CSV/JSON output."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .baselines import SCHEMES, UMI_FIXED, SchemeSpec, mean_and_stderr, run_trial
from .metrics import tradeoff_functions
from .scenario import ConfigError, ScenarioConfig, config_from_mapping, dbm_to_watt

SWEEP_VARIABLES = ("p_bs_max_dbm", "n_irs_elements", "n_ues", "tirs_angle_deg", "none")
CSV_COLUMNS = ("experiment_id", "scheme", "sweep_value", "trial", "sum_rate_mbps", "feasible",
               "iterations_total", "h_uav", "x_uav", "y_uav", "wall_ms", "status")
_SPEC_KEYS = {"experiment_id", "sweep_variable", "sweep_values", "schemes", "n_trials", "base_seed",
              "output_dir", "scenario"}


@dataclass(frozen=True)
class ExperimentSpec:
    experiment_id: str
    sweep_variable: str = "none"
    sweep_values: tuple = ()
    schemes: tuple[str, ...] = SCHEMES
    n_trials: int = 1
    base_seed: int = 0
    output_dir: str = "results"
    scenario: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if not self.experiment_id or any(c in self.experiment_id for c in "/\\ "):
            raise ConfigError("experiment_id must be a nonempty single path component")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep_variable must be one of {SWEEP_VARIABLES}")
        if self.sweep_variable != "none" and not self.sweep_values:
            raise ConfigError("sweep_values must be nonempty for a sweep")
        if int(self.n_trials) != self.n_trials or self.n_trials < 1:
            raise ConfigError("n_trials must be a positive integer")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown or not self.schemes:
            raise ConfigError(f"unknown or missing schemes {unknown}; choose from {SCHEMES}")
        self.base_config()

    @property
    def values(self) -> tuple:
        return self.sweep_values if self.sweep_variable != "none" else (None,)

    def base_config(self) -> ScenarioConfig:
        return config_from_mapping(dict(self.scenario))

    def config_for(self, value) -> ScenarioConfig:
        cfg = self.base_config()
        var = self.sweep_variable
        if var == "none":
            return cfg
        if var == "p_bs_max_dbm":
            return cfg.replace(p_bs_max=dbm_to_watt(float(value)))
        if var in ("n_irs_elements", "n_ues"):
            return cfg.replace(**{var: int(value)})
        return cfg.replace(tirs_angle_deg=float(value))


def spec_from_mapping(data: Mapping[str, Any], **overrides) -> ExperimentSpec:
    unknown = set(data) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown experiment keys {sorted(unknown)}")
    values = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    if "experiment_id" not in values:
        raise ConfigError("experiment_id is required")
    return ExperimentSpec(**values)


def load_experiment(path: str | Path, **overrides) -> ExperimentSpec:
    import tomli

    with open(path, "rb") as fh:
        return spec_from_mapping(tomli.load(fh), **overrides)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list[dict]
    summary: dict

    @property
    def all_optimal(self) -> bool:
        return all(r["status"] == "optimal" for r in self.rows)


def row_status(trial_status: str, feasible: bool) -> str:
    """``optimal`` when every accepted solve verified and the final state is feasible."""
    if trial_status == "infeasible":
        return "infeasible"
    if trial_status == "converged-by-failure":
        return "numerical-limit"
    return "optimal" if feasible else "infeasible"


def _task(args) -> dict:
    spec_id, scheme, value, cfg, seed, trial, timing = args
    res = run_trial(SchemeSpec(scheme), cfg, seed, trial)
    u = res.uav_position
    return {
        "experiment_id": spec_id, "scheme": scheme, "sweep_value": "" if value is None else value,
        "trial": trial, "sum_rate_mbps": res.sum_rate_mbps, "feasible": res.feasible,
        "iterations_total": res.iterations_total, "h_uav": float(u[2]), "x_uav": float(u[0]),
        "y_uav": float(u[1]), "wall_ms": res.wall_ms if timing else 0.0,
        "status": row_status(res.status, res.feasible),
    }


def summarize(spec: ExperimentSpec, rows: list[dict]) -> dict:
    """Per (sweep value, scheme) mean and standard error over all trials."""
    cells = []
    for value in spec.values:
        key = "" if value is None else value
        for scheme in spec.schemes:
            sel = [r for r in rows if r["scheme"] == scheme and r["sweep_value"] == key]
            mean, se = mean_and_stderr([r["sum_rate_mbps"] for r in sel])
            cells.append({"sweep_value": value, "scheme": scheme, "mean_sum_rate_mbps": mean, "stderr_mbps": se,
                          "n_trials": len(sel), "n_feasible": sum(bool(r["feasible"]) for r in sel)})
    return {"experiment_id": spec.experiment_id, "sweep_variable": spec.sweep_variable,
            "base_seed": spec.base_seed, "cells": cells}


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([repr(float(r[c])) if isinstance(r[c], (float, np.floating)) else r[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def run_experiment(spec: ExperimentSpec, jobs: int = 1, timing: bool = True, write: bool = True) -> ExperimentResult:
    """Every (sweep value, scheme, trial) cell; rows come back in that order regardless of ``jobs``."""
    tasks = [(spec.experiment_id, scheme, value, spec.config_for(value), spec.base_seed, t, timing)
             for value in spec.values for scheme in spec.schemes for t in range(spec.n_trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_task, tasks))
    else:
        rows = [_task(t) for t in tasks]
    summary = summarize(spec, rows)
    if write:
        out = Path(spec.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{spec.experiment_id}.csv").write_text(rows_to_csv(rows))
        (out / f"{spec.experiment_id}_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return ExperimentResult(spec, rows, summary)


def tradeoff_sweep(cfg: ScenarioConfig, altitudes, trials: int = 1, base_seed: int = 0) -> list[dict]:
    """Pinned-altitude runs: path-loss and pattern terms plus the optimized sum rate per altitude."""
    rows = []
    for h in altitudes:
        h = float(h)
        if not cfg.h_uav_min <= h <= cfg.h_uav_max:
            raise ValueError(f"altitude {h} outside [{cfg.h_uav_min}, {cfg.h_uav_max}]")
        spec = SchemeSpec(UMI_FIXED, fixed_altitude=h)
        rates, f_pl, f_ra = [], [], []
        for t in range(trials):
            res = run_trial(spec, cfg, base_seed, t)
            rates.append(res.sum_rate_mbps)
            pl, ra = tradeoff_functions(res.placement, cfg)
            f_pl.append(pl)
            f_ra.append(ra)
        mean, se = mean_and_stderr(rates)
        rows.append({"h_uav": h, "f_pl": float(np.mean(f_pl)), "f_ra": float(np.mean(f_ra)),
                     "mean_sum_rate_mbps": mean, "stderr_mbps": se, "trials": trials})
    return rows

