import numpy as np
import pytest

from aerial_irs.channel import generate_channel
from aerial_irs.metrics import NetworkState
from aerial_irs.scenario import (
    CHANNEL_STREAM,
    UE_STREAM,
    Placement,
    ScenarioConfig,
    derive_trial_rng,
    initial_uav_position,
    sample_ue_positions,
)


def make_instance(cfg: ScenarioConfig, seed: int = 42, trial: int = 0):
    ue = sample_ue_positions(cfg, derive_trial_rng(seed, trial, UE_STREAM))
    p = Placement(ue, initial_uav_position(cfg))
    ch = generate_channel(cfg, p, derive_trial_rng(seed, trial, CHANNEL_STREAM))
    return ch, p


def random_state(cfg: ScenarioConfig, rng: np.random.Generator, uav=None) -> NetworkState:
    k, n, m = cfg.n_ues, cfg.n_bs_antennas, cfg.n_irs_elements
    w = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
    w *= np.sqrt(cfg.p_bs_max * rng.uniform(0.2, 1.0)) / np.linalg.norm(w)
    phi = rng.uniform(0.3, 1.0, m) * np.exp(2j * np.pi * rng.random(m))
    if uav is None:
        uav = [rng.uniform(*cfg.uav_x_range), rng.uniform(*cfg.uav_y_range),
               rng.uniform(cfg.h_uav_min, cfg.h_uav_max)]
    return NetworkState(w, phi, np.asarray(uav, dtype=float))


@pytest.fixture
def tiny_cfg():
    return ScenarioConfig(n_bs_antennas=2, n_irs_elements=2, n_ues=2)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def report(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[criterion])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
