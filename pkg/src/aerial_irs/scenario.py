"""Static scenario configuration, geometry and per-trial random streams."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np


class ConfigError(ValueError):
    """Invalid scenario or experiment configuration."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * np.log10(watt) + 30.0


def thermal_noise_watt(bandwidth: float, noise_figure_db: float = 10.0) -> float:
    """Noise power over ``bandwidth`` at -174 dBm/Hz plus a noise figure."""
    return dbm_to_watt(-174.0 + 10.0 * np.log10(bandwidth) + noise_figure_db)


_DEFAULT_BANDWIDTH = 10e6


@dataclass(frozen=True)
class ScenarioConfig:
    n_bs_antennas: int = 16
    n_irs_elements: int = 50
    n_ues: int = 6
    bs_position: tuple[float, float, float] = (0.0, 0.0, 25.0)
    ue_region_center: tuple[float, float] = (0.0, 50.0)
    ue_region_radius: float = 30.0
    p_bs_max: float = dbm_to_watt(38.0)
    qos_rate: float = 5e6
    bandwidth: float = _DEFAULT_BANDWIDTH
    noise_power: float = thermal_noise_watt(_DEFAULT_BANDWIDTH)
    c0: float = db_to_linear(-30.0)
    alpha_bs_uav: float = 2.0
    alpha_uav_ue: float = 2.2
    rician_k_bs_uav: float = db_to_linear(10.0)
    rician_k_uav_ue: float = db_to_linear(5.0)
    h_uav_min: float = 30.0
    h_uav_max: float = 120.0
    # horizontal flight box; the UAV optimizer and the grid oracle share it
    uav_x_range: tuple[float, float] = (-60.0, 60.0)
    uav_y_range: tuple[float, float] = (-40.0, 110.0)
    initial_altitude: float = 70.0
    fixed_altitude: float = 70.0
    carrier_frequency: float = 2e9
    tirs_angle_deg: float = 60.0
    tirs_radius: float | None = None
    tirs_alpha_bs_irs: float = 2.0
    tirs_alpha_irs_ue: float = 2.4
    tirs_boresight: str = "bisector"
    epsilon_outer: float = 1e-3
    epsilon_inner: float = 1e-3
    max_inner_iters: int = 50
    max_outer_rounds: int = 30
    solver_tol: float = 1e-8

    def __post_init__(self):
        for name in ("n_bs_antennas", "n_irs_elements", "n_ues", "max_inner_iters", "max_outer_rounds"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        for name in ("bs_position", "ue_region_center", "uav_x_range", "uav_y_range"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if len(self.bs_position) != 3 or len(self.ue_region_center) != 2:
            raise ConfigError("bs_position must be 3-D and ue_region_center 2-D")
        h_bs = self.bs_position[2]
        if not (self.h_uav_min > h_bs >= 0.0):
            raise ConfigError("need h_uav_min > BS height >= 0")
        if self.h_uav_max < self.h_uav_min:
            raise ConfigError("h_uav_max < h_uav_min")
        for name in ("p_bs_max", "bandwidth", "noise_power", "c0", "carrier_frequency"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("alpha_bs_uav", "alpha_uav_ue", "tirs_alpha_bs_irs", "tirs_alpha_irs_ue"):
            if getattr(self, name) < 2.0:
                raise ConfigError(f"{name} must be >= 2")
        if self.ue_region_radius < 0 or self.qos_rate < 0:
            raise ConfigError("ue_region_radius and qos_rate must be nonnegative")
        if self.rician_k_bs_uav < 0 or self.rician_k_uav_ue < 0:
            raise ConfigError("Rician K-factors must be nonnegative")
        if not self.qos_rate / self.bandwidth < np.log(np.finfo(float).max):
            raise ConfigError("qos_rate / bandwidth too large")
        for name in ("uav_x_range", "uav_y_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ConfigError(f"{name} must be ordered")
        if self.tirs_boresight not in ("bisector", "ue_center"):
            raise ConfigError("tirs_boresight must be 'bisector' or 'ue_center'")

    @property
    def h_bs(self) -> float:
        return self.bs_position[2]

    @property
    def qos_sinr(self) -> float:
        """Minimum SINR implied by the per-UE rate target."""
        return float(np.expm1(self.qos_rate / self.bandwidth))

    @property
    def wavelength(self) -> float:
        return 299_792_458.0 / self.carrier_frequency

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_FIELDS = {f.name for f in dataclasses.fields(ScenarioConfig)}
_DB_KEYS = {
    "p_bs_max_dbm": ("p_bs_max", dbm_to_watt),
    "noise_power_dbm": ("noise_power", dbm_to_watt),
    "c0_db": ("c0", db_to_linear),
    "rician_k_bs_uav_db": ("rician_k_bs_uav", db_to_linear),
    "rician_k_uav_ue_db": ("rician_k_uav_ue", db_to_linear),
}


def config_from_mapping(values: Mapping[str, Any], base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a config from flat key/values; ``_db``/``_dbm`` keys are converted to linear."""
    changes: dict[str, Any] = {}
    for key, val in values.items():
        if key in _DB_KEYS:
            target, conv = _DB_KEYS[key]
            if target in values:
                raise ConfigError(f"both {key} and {target} given")
            changes[target] = conv(float(val))
        elif key in _FIELDS:
            changes[key] = val
        else:
            raise ConfigError(f"unknown scenario key {key!r}")
    if "bandwidth" in changes and "noise_power" not in changes:
        changes["noise_power"] = thermal_noise_watt(float(changes["bandwidth"]))
    base = base or ScenarioConfig()
    try:
        return dataclasses.replace(base, **changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ScenarioConfig:
    import tomli

    with open(path, "rb") as fh:
        data = tomli.load(fh)
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"scenario file must be flat, found tables {nested}")
    return config_from_mapping(data)


@dataclass(frozen=True)
class Placement:
    """UE ground positions plus the IRS carrier position.

    ``irs_normal`` is the IRS boresight; a UAV-mounted surface faces straight
    down.
    """

    ue_positions: np.ndarray
    uav_position: np.ndarray
    irs_normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))

    def __post_init__(self):
        ue = np.atleast_2d(np.asarray(self.ue_positions, dtype=float))
        if ue.shape[1] == 2:
            ue = np.column_stack([ue, np.zeros(len(ue))])
        normal = np.asarray(self.irs_normal, dtype=float)
        object.__setattr__(self, "ue_positions", ue)
        object.__setattr__(self, "uav_position", np.asarray(self.uav_position, dtype=float).reshape(3))
        object.__setattr__(self, "irs_normal", normal / np.linalg.norm(normal))

    @property
    def aerial(self) -> bool:
        return bool(np.allclose(self.irs_normal, [0.0, 0.0, -1.0]))

    def moved_to(self, uav_position) -> "Placement":
        return Placement(self.ue_positions, np.asarray(uav_position, dtype=float), self.irs_normal)


def sample_ue_positions(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """K points uniform over the UE disk, shape (K, 2)."""
    k = cfg.n_ues
    radius = cfg.ue_region_radius * np.sqrt(rng.random(k))
    angle = 2.0 * np.pi * rng.random(k)
    cx, cy = cfg.ue_region_center
    return np.column_stack([cx + radius * np.cos(angle), cy + radius * np.sin(angle)])


def initial_uav_position(cfg: ScenarioConfig) -> np.ndarray:
    """Midpoint of the BS and the UE-region center at the clamped start altitude."""
    bx, by, _ = cfg.bs_position
    cx, cy = cfg.ue_region_center
    h = float(np.clip(cfg.initial_altitude, cfg.h_uav_min, cfg.h_uav_max))
    return np.array([(bx + cx) / 2.0, (by + cy) / 2.0, h])


def distance_vectors(p: Placement, cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """IRS-to-BS offset ``d_0`` and IRS-to-UE offsets ``d_k`` (rows)."""
    d0 = p.uav_position - np.asarray(cfg.bs_position)
    dk = p.uav_position[None, :] - p.ue_positions
    if np.linalg.norm(d0) == 0.0 or np.any(np.linalg.norm(dk, axis=1) == 0.0):
        raise ValueError("IRS position coincides with the BS or a UE")
    return d0, dk


# stream ids keep UE drops, fading and initial phases independent of each other
UE_STREAM, CHANNEL_STREAM, INIT_STREAM = 0, 1, 2


def derive_trial_rng(base_seed: int, trial_index: int, stream: int = 0) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``(base_seed, trial_index, stream)``."""
    seq = np.random.SeedSequence([int(base_seed), int(trial_index), int(stream)])
    return np.random.Generator(np.random.Philox(seq))
