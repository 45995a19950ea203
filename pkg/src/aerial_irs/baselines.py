"""Comparison schemes: UAV-mounted surface variants and a terrestrial surface."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algorithm import RunTrace, run
from .channel import ChannelRealization, generate_channel
from .metrics import NetworkState, feasibility_report, qos_satisfied, sum_rate, to_mbps
from .scenario import (
    CHANNEL_STREAM,
    INIT_STREAM,
    UE_STREAM,
    Placement,
    ScenarioConfig,
    derive_trial_rng,
    initial_uav_position,
    sample_ue_positions,
)

UMI_OPT, UMI_FIXED, UMI_NO_PHASE, TIRS, TIRS_NO_PHASE = (
    "UmIOptAltitude", "UmIFixedAltitude", "UmINoPhase", "TIRS", "TIRSNoPhase")
SCHEMES = (UMI_OPT, UMI_FIXED, UMI_NO_PHASE, TIRS, TIRS_NO_PHASE)


@dataclass(frozen=True)
class SchemeSpec:
    """Scheme tag plus its overrides; ``None`` falls back to the scenario value."""

    tag: str
    fixed_altitude: float | None = None
    tirs_angle_deg: float | None = None

    def __post_init__(self):
        if self.tag not in SCHEMES:
            raise ValueError(f"unknown scheme {self.tag!r}; choose from {SCHEMES}")

    @property
    def optimize_phase(self) -> bool:
        return self.tag not in (UMI_NO_PHASE, TIRS_NO_PHASE)

    @property
    def terrestrial(self) -> bool:
        return self.tag in (TIRS, TIRS_NO_PHASE)

    @property
    def mode(self) -> str:
        if self.terrestrial:
            return "fixed"
        return "free" if self.tag == UMI_OPT else "pinned"


def tirs_position(cfg: ScenarioConfig, angle_deg: float | None = None) -> np.ndarray:
    """Terrestrial surface at BS height on a circle around the UE-region center.

    The angle is measured at the center between the directions to the BS and
    to the surface; the radius defaults to the BS-to-center distance.
    """
    angle = np.deg2rad(cfg.tirs_angle_deg if angle_deg is None else angle_deg)
    center = np.asarray(cfg.ue_region_center)
    to_bs = np.asarray(cfg.bs_position[:2]) - center
    radius = np.linalg.norm(to_bs) if cfg.tirs_radius is None else cfg.tirs_radius
    u = to_bs / np.linalg.norm(to_bs)
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    xy = center + radius * (rot @ u)
    return np.array([xy[0], xy[1], cfg.h_bs])


def tirs_boresight(cfg: ScenarioConfig, position: np.ndarray) -> np.ndarray:
    """Facade normal: bisecting the BS and UE-center directions, or toward the UE center."""
    center = np.array([*cfg.ue_region_center, 0.0])
    to_center = center - position
    to_center /= np.linalg.norm(to_center)
    if cfg.tirs_boresight == "ue_center":
        return to_center
    to_bs = np.asarray(cfg.bs_position) - position
    norm = np.linalg.norm(to_bs)
    if norm == 0.0:
        raise ValueError("terrestrial surface coincides with the BS")
    normal = to_bs / norm + to_center
    return normal / np.linalg.norm(normal)


def tirs_placement(cfg: ScenarioConfig, ue_positions, angle_deg: float | None = None) -> Placement:
    pos = tirs_position(cfg, angle_deg)
    return Placement(ue_positions, pos, tirs_boresight(cfg, pos))


def scheme_config(spec: SchemeSpec, cfg: ScenarioConfig) -> ScenarioConfig:
    if spec.terrestrial:
        return cfg.replace(alpha_bs_uav=cfg.tirs_alpha_bs_irs, alpha_uav_ue=cfg.tirs_alpha_irs_ue)
    return cfg


def scheme_placement(spec: SchemeSpec, cfg: ScenarioConfig, ue_positions) -> Placement:
    if spec.terrestrial:
        return tirs_placement(cfg, ue_positions, spec.tirs_angle_deg)
    start = initial_uav_position(cfg)
    if spec.mode == "pinned":
        start[2] = cfg.fixed_altitude if spec.fixed_altitude is None else spec.fixed_altitude
        if not cfg.h_uav_min <= start[2] <= cfg.h_uav_max:
            raise ValueError("fixed altitude outside the altitude box")
    return Placement(ue_positions, start)


def run_scheme(spec: SchemeSpec, cfg: ScenarioConfig, ch: ChannelRealization, p: Placement,
               rng: np.random.Generator, backend: str = "clarabel") -> tuple[NetworkState, RunTrace]:
    """Run the alternating optimizer with the scheme's frozen blocks removed.

    ``cfg`` must already carry the scheme's path-loss exponents (see
    :func:`scheme_config`).
    """
    return run(cfg, ch, p, rng, mode=spec.mode, optimize_phase=spec.optimize_phase, backend=backend)


@dataclass
class TrialResult:
    scheme: str
    trial: int
    sum_rate_mbps: float
    feasible: bool
    iterations_total: int
    uav_position: np.ndarray
    status: str
    wall_ms: float
    trace: RunTrace
    state: NetworkState
    # final geometry, the realization and the scheme-adjusted config the run used
    placement: Placement
    channel: ChannelRealization
    config: ScenarioConfig


def run_trial(spec: SchemeSpec, cfg: ScenarioConfig, base_seed: int, trial: int,
              backend: str = "clarabel") -> TrialResult:
    """One Monte-Carlo trial with common random numbers across schemes.

    UE drops, fading and initial phases come from separate derived streams,
    so every scheme (and every sweep value) sees the same draws.
    """
    import time

    t0 = time.perf_counter()
    ue = sample_ue_positions(cfg, derive_trial_rng(base_seed, trial, UE_STREAM))
    eff = scheme_config(spec, cfg)
    p = scheme_placement(spec, eff, ue)
    ch = generate_channel(eff, p, derive_trial_rng(base_seed, trial, CHANNEL_STREAM))
    state, trace = run_scheme(spec, eff, ch, p, derive_trial_rng(base_seed, trial, INIT_STREAM), backend)
    # pinned and fixed schemes must stay at their assigned altitude
    altitude = None if spec.mode == "free" else p.uav_position[2]
    checks = feasibility_report(state, eff, altitude=altitude)
    feasible = trace.status != "infeasible" and all(checks.values()) and bool(
        np.all(qos_satisfied(state, ch, p, eff)))
    rate = to_mbps(sum_rate(state, ch, p, eff))
    return TrialResult(spec.tag, trial, rate, feasible, trace.iterations_total, state.uav_position.copy(),
                       trace.status, 1e3 * (time.perf_counter() - t0), trace, state,
                       p.moved_to(state.uav_position), ch, eff)


def mean_and_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(np.mean(v)), se


def tirs_angle_sweep(cfg: ScenarioConfig, angles, trials: int, base_seed: int = 0,
                     no_phase: bool = False) -> list[dict]:
    """Per-angle mean sum rate (Mbps) and standard error of the terrestrial scheme."""
    angles = list(angles)
    if not angles:
        raise ValueError("angles must be nonempty")
    rows = []
    tag = TIRS_NO_PHASE if no_phase else TIRS
    for angle in angles:
        spec = SchemeSpec(tag, tirs_angle_deg=float(angle))
        rates = [run_trial(spec, cfg, base_seed, t).sum_rate_mbps for t in range(trials)]
        mean, se = mean_and_stderr(rates)
        rows.append({"angle_deg": float(angle), "mean_sum_rate_mbps": mean, "stderr_mbps": se, "trials": trials})
    return rows
