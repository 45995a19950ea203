"""Alternating inner-approximation driver.

One run: feasibility-restoring initialization, then rounds of
(beamforming + placement) and (phase + placement) inner loops until the two
loops' final surrogate objectives agree.
"""
from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelRealization, cascaded_rows
from .metrics import NetworkState, sum_rate, to_mbps
from .scenario import Placement, ScenarioConfig
from .subproblems import (
    BEAMFORMING,
    INITIALIZER,
    PHASE,
    SubproblemError,
    build,
    extract_point,
    solve_verified,
)
from .surrogate import SurrogatePoint, tight_point

INIT_SUCCESS_TOL = 1e-6


@dataclass
class IterationRecord:
    outer_round: int
    inner_iter: int
    kind: str
    surrogate_obj_nats: float
    true_sum_rate_mbps: float
    x: float
    y: float
    h: float
    solve_ms: float
    elapsed_s: float
    status: str


@dataclass
class OuterRecord:
    outer_round: int
    c_w: float
    c_phi: float
    gap: float


@dataclass
class RunTrace:
    records: list[IterationRecord] = field(default_factory=list)
    outer: list[OuterRecord] = field(default_factory=list)
    status: str = "running"
    init_iterations: int = 0
    init_delta: float = float("nan")

    CSV_COLUMNS = ("outer_round", "inner_iter", "kind", "surrogate_obj_nats", "true_sum_rate_mbps",
                   "x", "y", "h", "solve_ms")

    @property
    def iterations_total(self) -> int:
        return len(self.records)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def of_kind(self, *kinds: str) -> list[IterationRecord]:
        return [r for r in self.records if r.kind in kinds]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_COLUMNS)
            for r in self.records:
                row = asdict(r)
                writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in self.CSV_COLUMNS])


def inner_converged(objectives, eps: float = 1e-3, max_iters: int = 50) -> bool:
    """Relative-improvement rule on the surrogate objectives of one inner loop.

    ``objectives[0]`` is the value at the loop's starting point; every later
    entry is one solve.
    """
    n_solves = len(objectives) - 1
    if n_solves >= max_iters:
        return True
    if n_solves < 1:
        return False
    prev, cur = objectives[-2], objectives[-1]
    return (cur - prev) / max(abs(prev), 1e-300) < eps


def random_phases(m: int, rng: np.random.Generator) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(m))


def matched_filter(ch: ChannelRealization, phi: np.ndarray, p_max: float) -> np.ndarray:
    """Per-UE matched filters on the cascaded channel with an equal power split."""
    h = cascaded_rows(ch.G, ch.g, phi)
    norms = np.linalg.norm(h, axis=1, keepdims=True)
    k = h.shape[0]
    w = np.where(norms > 0, h.conj() / np.where(norms > 0, norms, 1.0), 1.0 / np.sqrt(h.shape[1]))
    return w * np.sqrt(p_max / k)


class _Driver:
    def __init__(self, cfg, ch, p, mode, backend, trace):
        self.cfg, self.ch, self.p, self.mode, self.backend, self.trace = cfg, ch, p, mode, backend, trace
        self.t0 = time.perf_counter()

    def step(self, kind: str, point: SurrogatePoint, outer: int, inner: int):
        """One verified solve; returns the extraction or None on failure."""
        cfg = self.cfg
        try:
            prog = build(kind, point, self.ch, self.p, cfg, self.mode)
            res = solve_verified(prog, self.backend, cfg.solver_tol)
            ex = extract_point(prog, res, self.ch, self.p, cfg)
        except SubproblemError:
            return None
        rate = sum_rate(ex.state, self.ch, self.p, cfg)
        u = ex.state.uav_position
        self.trace.records.append(IterationRecord(
            outer, inner, kind, ex.objective, to_mbps(rate), float(u[0]), float(u[1]), float(u[2]),
            1e3 * res.wall_time, time.perf_counter() - self.t0, res.status))
        return ex

    def inner_loop(self, kind: str, point: SurrogatePoint, outer: int):
        cfg = self.cfg
        objectives = [cfg.bandwidth * float(np.sum(np.log1p(point.lam)))]
        failed = False
        while True:
            ex = self.step(kind, point, outer, len(objectives) - 1)
            if ex is None:
                failed = True
                break
            point = ex.point
            objectives.append(ex.objective)
            if inner_converged(objectives, cfg.epsilon_inner, cfg.max_inner_iters):
                break
        return point, objectives[-1], failed


def initialize(cfg: ScenarioConfig, ch: ChannelRealization, p: Placement, rng: np.random.Generator,
               mode: str = "free", optimize_phase: bool = True, backend: str = "clarabel",
               trace: RunTrace | None = None) -> tuple[NetworkState, SurrogatePoint, bool]:
    """Random unit-modulus phases, matched-filter beamformers, then restoration solves.

    Returns the state, its tight expansion point and whether the QoS
    shortfall was driven to zero.
    """
    trace = RunTrace() if trace is None else trace
    phi = random_phases(ch.n_irs, rng) if optimize_phase else np.ones(ch.n_irs, dtype=complex)
    w = matched_filter(ch, phi, cfg.p_bs_max)
    state = NetworkState(w, phi, p.uav_position)
    point = tight_point(state, ch, p, cfg, fixed_geometry=mode == "fixed")
    driver = _Driver(cfg, ch, p, mode, backend, trace)
    for it in range(cfg.max_inner_iters):
        ex = driver.step(INITIALIZER, point, 0, it)
        trace.init_iterations = it + 1
        if ex is None:
            return point.state, point, False
        point = ex.point
        trace.init_delta = ex.objective
        if ex.objective >= -INIT_SUCCESS_TOL:
            return point.state, point, True
    return point.state, point, False


def run(cfg: ScenarioConfig, ch: ChannelRealization, p: Placement, rng: np.random.Generator,
        mode: str = "free", optimize_phase: bool = True, backend: str = "clarabel") -> tuple[NetworkState, RunTrace]:
    """Full alternating optimization from a fresh initial point.

    ``trace.status`` is one of ``converged``, ``max-rounds``,
    ``converged-by-failure`` (a solve could not be verified, the last
    verified point is returned) or ``infeasible`` (initialization failed).
    """
    trace = RunTrace()
    state, point, ok = initialize(cfg, ch, p, rng, mode, optimize_phase, backend, trace)
    if not ok:
        trace.status = "infeasible"
        return state, trace
    driver = _Driver(cfg, ch, p, mode, backend, trace)
    driver.t0 = time.perf_counter() - (trace.records[-1].elapsed_s if trace.records else 0.0)
    trace.status = "max-rounds"
    for outer in range(cfg.max_outer_rounds):
        point, c_w, failed = driver.inner_loop(BEAMFORMING, point, outer)
        if failed:
            trace.status = "converged-by-failure"
            break
        if not optimize_phase:
            trace.outer.append(OuterRecord(outer, c_w, c_w, 0.0))
            trace.status = "converged"
            break
        point, c_phi, failed = driver.inner_loop(PHASE, point, outer)
        if failed:
            trace.status = "converged-by-failure"
            break
        gap = abs(c_w - c_phi) / cfg.bandwidth
        trace.outer.append(OuterRecord(outer, c_w, c_phi, gap))
        if gap < cfg.epsilon_outer:
            trace.status = "converged"
            break
    return point.state, trace
