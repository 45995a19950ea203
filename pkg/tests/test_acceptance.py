"""Acceptance checks; each test prints one PASS/FAIL line (collected in the terminal summary)."""
import time

import numpy as np
import pytest

from aerial_irs.baselines import (
    SCHEMES,
    TIRS,
    TIRS_NO_PHASE,
    UMI_FIXED,
    UMI_NO_PHASE,
    UMI_OPT,
    SchemeSpec,
    mean_and_stderr,
    run_trial,
    scheme_placement,
    tirs_angle_sweep,
)
from aerial_irs.conic import parse_program, solve, verify_solution
from aerial_irs.experiments import tradeoff_sweep
from aerial_irs.metrics import feasibility_report, qos_satisfied, sinr, sinr_distance_form
from aerial_irs.scenario import ScenarioConfig, dbm_to_watt
from aerial_irs.subproblems import BEAMFORMING, PHASE

from conftest import make_instance, random_state, report
from golden_cases import GOLDEN_DIR
from oracles import single_ue_oracle, surrogate_suite

DEFAULT = ScenarioConfig()
SEED = 42
N_RUNS = 20
SWEEP_TRIALS = 5
POWERS_DBM = (30, 34, 38, 42, 46)
ELEMENTS = (20, 40, 60, 80)

_CACHE: dict = {}


def default_runs(tag: str):
    """N_RUNS default-scenario trials of one scheme, computed once per session."""
    if tag not in _CACHE:
        _CACHE[tag] = [run_trial(SchemeSpec(tag), DEFAULT, SEED, t) for t in range(N_RUNS)]
    return _CACHE[tag]


@pytest.mark.slow
def test_criterion_1_surrogate_validity():
    t0 = time.perf_counter()
    suite = surrogate_suite(seed=11)
    elapsed = time.perf_counter() - t0
    worst_v = max(v for v, _ in suite.values())
    worst_t = max(t for _, t in suite.values())
    ok = worst_v <= 1e-12 and worst_t <= 1e-9 and elapsed < 10.0
    report(1, ok, f"worst violation {worst_v:.2e}, worst tangency {worst_t:.2e}, {elapsed:.1f} s")
    assert ok


@pytest.mark.slow
def test_criterion_2_ascent_and_convergence():
    runs = default_runs(UMI_OPT)
    worst = 0.0
    for r in runs:
        rates = np.array([x.true_sum_rate_mbps for x in r.trace.of_kind(BEAMFORMING, PHASE)])
        if rates.size > 1:
            worst = max(worst, float(np.max(-np.diff(rates) / rates[:-1])))
    converged = sum(r.trace.converged for r in runs)
    ascent_ok = worst <= 1e-5
    conv_ok = converged >= 0.9 * len(runs)
    report(2, ascent_ok and conv_ok,
           f"worst relative drop {worst:.2e}; converged in 30 rounds {converged}/{len(runs)} (need 90%)")
    assert ascent_ok, "ascent violated"
    assert conv_ok, "outer convergence rate below 90%"


@pytest.mark.slow
def test_criterion_3_feasibility():
    bad = []
    for tag in SCHEMES:
        spec = SchemeSpec(tag)
        for r in default_runs(tag):
            altitude = None
            if spec.mode != "free":
                altitude = scheme_placement(spec, r.config, r.placement.ue_positions).uav_position[2]
            checks = feasibility_report(r.state, r.config, power_tol=1e-6, phi_tol=1e-8, altitude=altitude)
            qos = qos_satisfied(r.state, r.channel, r.placement, r.config, tol=1e-6)
            if not (all(checks.values()) and np.all(qos)):
                bad.append((tag, r.trial))
    n = N_RUNS * len(SCHEMES)
    report(3, not bad, f"{n - len(bad)}/{n} final states feasible" + (f"; failing {bad[:5]}" if bad else ""))
    assert not bad


@pytest.mark.slow
def test_criterion_4_single_ue_oracle():
    cfg = ScenarioConfig(n_ues=1, n_bs_antennas=2, n_irs_elements=2)
    hits, ratios = 0, []
    for t in range(20):
        res = run_trial(SchemeSpec(UMI_OPT), cfg, SEED, t)
        oracle, _ = single_ue_oracle(cfg, res.channel, res.placement.ue_positions, step=1.0)
        achieved = res.sum_rate_mbps * np.log(2) * 1e6
        ratios.append(achieved / oracle)
        hits += achieved >= 0.95 * oracle
    ok = hits >= 18
    report(4, ok, f"{hits}/20 seeds within 95% of the grid oracle; min ratio {min(ratios):.4f}")
    assert ok


def _ordered(a, b):
    (ma, sa), (mb, sb) = a, b
    return ma - sa > mb + sb


@pytest.mark.slow
def test_criterion_5_scheme_ordering():
    stats = {tag: mean_and_stderr([r.sum_rate_mbps for r in default_runs(tag)]) for tag in SCHEMES}
    pairs = [(UMI_OPT, UMI_FIXED), (UMI_FIXED, TIRS), (UMI_FIXED, UMI_NO_PHASE), (TIRS, TIRS_NO_PHASE)]
    failed = [f"{a}>{b}" for a, b in pairs if not _ordered(stats[a], stats[b])]
    detail = ", ".join(f"{t} {m:.1f}+-{s:.1f}" for t, (m, s) in stats.items())
    report(5, not failed, detail + (f"; violated {failed}" if failed else ""))
    assert not failed


def _sweep_means(field, values):
    out = {}
    for tag in SCHEMES:
        means = []
        for v in values:
            cfg = DEFAULT.replace(**{field: v})
            means.append(np.mean([run_trial(SchemeSpec(tag), cfg, SEED, t).sum_rate_mbps
                                  for t in range(SWEEP_TRIALS)]))
        out[tag] = means
    return out


@pytest.mark.slow
def test_criterion_6_monotone_sweeps():
    power = _sweep_means("p_bs_max", [dbm_to_watt(v) for v in POWERS_DBM])
    elems = _sweep_means("n_irs_elements", list(ELEMENTS))
    failed = [f"{tag}/P" for tag, m in power.items() if not np.all(np.diff(m) > 0)]
    failed += [f"{tag}/M" for tag, m in elems.items() if not np.all(np.diff(m) > 0)]
    detail = "; ".join(f"{tag} P {np.round(power[tag], 1).tolist()} M {np.round(elems[tag], 1).tolist()}"
                       for tag in SCHEMES)
    report(6, not failed, detail + (f"; not increasing {failed}" if failed else ""))
    assert not failed


def _iterations_to_99(trace):
    rates = [r.true_sum_rate_mbps for r in trace.of_kind(BEAMFORMING)]
    if not rates:
        return None
    final = rates[-1]
    return next(i + 1 for i, v in enumerate(rates) if v >= 0.99 * final)


@pytest.mark.slow
def test_criterion_7_convergence_profile():
    out = {}
    for tag in (UMI_NO_PHASE, TIRS_NO_PHASE):
        its = [_iterations_to_99(r.trace) for r in default_runs(tag)]
        out[tag] = (sum(i is not None and i <= 15 for i in its), its)
    ok = all(hits >= 0.8 * N_RUNS for hits, _ in out.values())
    report(7, ok, "; ".join(f"{t} {h}/{N_RUNS} within 15 (median {np.median([i for i in its if i]):.0f})"
                            for t, (h, its) in out.items()))
    assert ok


@pytest.mark.slow
def test_criterion_8_altitude_interior():
    hs = np.array([r.uav_position[2] for r in default_runs(UMI_OPT)])
    inside = int(np.sum((hs > 32.0) & (hs < 118.0)))
    ok = inside >= 0.9 * N_RUNS
    report(8, ok, f"{inside}/{N_RUNS} final altitudes in (32, 118); median {np.median(hs):.2f} m")
    assert ok


def test_criterion_9_conic_layer():
    import json

    frozen = json.loads((GOLDEN_DIR / "objectives.json").read_text())
    worst_obj, worst_res = 0.0, 0.0
    for name, value in frozen.items():
        prog = parse_program((GOLDEN_DIR / f"{name}.txt").read_text())
        for _ in range(2):
            res = solve(prog)
            worst_obj = max(worst_obj, abs(res.objective - value) / abs(value))
            worst_res = max(worst_res, verify_solution(prog, res).max_residual)
    cfg = ScenarioConfig(n_bs_antennas=2, n_irs_elements=2, n_ues=2)
    ch, p = make_instance(cfg, SEED)
    rng = np.random.default_rng(SEED)
    worst_sinr = 0.0
    for _ in range(1000):
        s = random_state(cfg, rng)
        a, b = sinr(s, ch, p, cfg), sinr_distance_form(s, ch, p, cfg)
        worst_sinr = max(worst_sinr, float(np.max(np.abs(a - b) / np.abs(b))))
    ok = worst_obj <= 1e-6 and worst_res <= 1e-6 and worst_sinr <= 1e-10
    report(9, ok, f"objective drift {worst_obj:.1e}, residual {worst_res:.1e}, SINR routes {worst_sinr:.1e}")
    assert ok


@pytest.mark.slow
def test_nested_schemes_dominate_per_trial():
    """Larger feasible sets under common random numbers: opt >= fixed >= no-phase, per trial."""
    opt, fixed, nophase = (default_runs(t) for t in (UMI_OPT, UMI_FIXED, UMI_NO_PHASE))
    bad = [t for t in range(N_RUNS)
           if not (opt[t].sum_rate_mbps >= fixed[t].sum_rate_mbps * (1 - 1e-4)
                   and fixed[t].sum_rate_mbps >= nophase[t].sum_rate_mbps * (1 - 1e-4))]
    assert not bad, f"dominance violated on trials {bad}"


# Regression pins measured on the defaults (seed 42). The altitude optimum sits on
# the floor above the BS, so the interior claims below are expected to fail.
PINNED_MEDIAN_ALTITUDE = 30.0
PINNED_TIRS_ARGMAX = 30.0
PINNED_TRADEOFF_ARGMAX = 30.0
TRADEOFF_GRID = (30.0, 50.0, 70.0, 90.0, 110.0)


@pytest.mark.slow
def test_altitude_median_pinned():
    hs = [r.uav_position[2] for r in default_runs(UMI_OPT)]
    assert abs(np.median(hs) - PINNED_MEDIAN_ALTITUDE) <= 0.5


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="rate falls with the angle under the bisector boresight")
def test_tirs_sixty_degrees_best():
    rows = tirs_angle_sweep(DEFAULT, [30.0, 60.0, 90.0], N_RUNS, base_seed=SEED)
    rates = {r["angle_deg"]: r["mean_sum_rate_mbps"] for r in rows}
    assert rates[60.0] > max(rates[30.0], rates[90.0])


@pytest.mark.slow
def test_tirs_angle_argmax_pinned():
    rows = tirs_angle_sweep(DEFAULT, [30.0, 45.0, 60.0, 75.0], SWEEP_TRIALS, base_seed=SEED)
    best = max(rows, key=lambda r: r["mean_sum_rate_mbps"])
    assert best["angle_deg"] == PINNED_TIRS_ARGMAX


@pytest.fixture(scope="module")
def tradeoff_rows():
    return tradeoff_sweep(DEFAULT, TRADEOFF_GRID, trials=SWEEP_TRIALS, base_seed=SEED)


def _tradeoff_argmax(rows):
    return max(rows, key=lambda r: r["mean_sum_rate_mbps"])["h_uav"]


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="pinned-altitude rate decreases monotonically from the floor")
def test_tradeoff_interior_argmax(tradeoff_rows):
    assert TRADEOFF_GRID[0] < _tradeoff_argmax(tradeoff_rows) < TRADEOFF_GRID[-1]


@pytest.mark.slow
def test_tradeoff_argmax_pinned(tradeoff_rows):
    assert _tradeoff_argmax(tradeoff_rows) == PINNED_TRADEOFF_ARGMAX
