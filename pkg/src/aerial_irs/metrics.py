"""Exact SINR, rate and QoS evaluation (no surrogates)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, cascade_gain, cascaded_rows
from .scenario import Placement, ScenarioConfig, distance_vectors

LN2 = np.log(2.0)


@dataclass(frozen=True)
class NetworkState:
    """Beamformers ``w`` (K, N), reflection vector ``phi`` (M,), UAV position."""

    w: np.ndarray
    phi: np.ndarray
    uav_position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", np.atleast_2d(np.asarray(self.w, dtype=complex)))
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=complex).ravel())
        object.__setattr__(self, "uav_position", np.asarray(self.uav_position, dtype=float).reshape(3))

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))


def feasibility_report(state: NetworkState, cfg: ScenarioConfig, power_tol=1e-6, phi_tol=1e-8,
                       altitude=None) -> dict[str, bool]:
    """Power budget, reflection amplitude and altitude checks."""
    h = state.uav_position[2]
    lo, hi = (cfg.h_uav_min, cfg.h_uav_max) if altitude is None else (altitude, altitude)
    return {
        "power": state.total_power <= cfg.p_bs_max * (1 + power_tol),
        "reflection": bool(np.all(np.abs(state.phi) <= 1 + phi_tol)),
        "altitude": bool(lo - 1e-9 <= h <= hi + 1e-9),
    }


def amplitudes(state: NetworkState, ch: ChannelRealization) -> np.ndarray:
    """A[k, l] = g_k^H Phi G w_l."""
    return cascaded_rows(ch.G, ch.g, state.phi) @ state.w.T


def sinr(state: NetworkState, ch: ChannelRealization, p: Placement, cfg: ScenarioConfig) -> np.ndarray:
    """Per-UE SINR with the IRS located at ``state.uav_position``."""
    gain = cascade_gain(p.moved_to(state.uav_position), cfg)
    power = np.abs(amplitudes(state, ch)) ** 2
    signal = gain * np.diag(power)
    interference = gain * (power.sum(axis=1) - np.diag(power))
    return signal / (interference + cfg.noise_power)


def sinr_distance_form(state: NetworkState, ch: ChannelRealization, p: Placement,
                       cfg: ScenarioConfig) -> np.ndarray:
    """Same SINR written with c0^2 |d|^-(3+alpha) terms and the altitude noise term.

    Only valid for a downward-facing IRS above the BS.
    """
    q = p.moved_to(state.uav_position)
    d0, dk = distance_vectors(q, cfg)
    h = q.uav_position[2]
    scale = cfg.c0**2 * np.linalg.norm(d0) ** -(3 + cfg.alpha_bs_uav) \
        * np.linalg.norm(dk, axis=1) ** -(3 + cfg.alpha_uav_ue)
    f_noise = cfg.noise_power / (h**3 * (h - cfg.h_bs) ** 3)
    power = np.abs(amplitudes(state, ch)) ** 2
    signal = scale * np.diag(power)
    interference = scale * (power.sum(axis=1) - np.diag(power))
    return signal / (interference + f_noise)


def rates_from_sinr(gamma, bandwidth: float) -> np.ndarray:
    """Per-UE rate in nats/s."""
    return bandwidth * np.log1p(np.asarray(gamma, dtype=float))


def sum_rate(state, ch, p, cfg) -> float:
    """Sum throughput in nats/s; convert with :func:`to_mbps` for reporting."""
    return float(np.sum(rates_from_sinr(sinr(state, ch, p, cfg), cfg.bandwidth)))


def to_mbps(nats_per_s) -> float:
    return float(nats_per_s) / LN2 / 1e6


def qos_satisfied(state, ch, p, cfg, tol: float = 1e-6) -> np.ndarray:
    rates = rates_from_sinr(sinr(state, ch, p, cfg), cfg.bandwidth)
    return rates >= cfg.qos_rate * (1.0 - tol)


def tradeoff_functions(p: Placement, cfg: ScenarioConfig) -> tuple[float, float]:
    """Average path-loss term F_PL and average radiation-pattern term F_Ra."""
    d0, dk = distance_vectors(p, cfg)
    n0, nk = np.linalg.norm(d0), np.linalg.norm(dk, axis=1)
    h = p.uav_position[2]
    f_pl = np.mean(n0 ** -cfg.alpha_bs_uav * nk ** -cfg.alpha_uav_ue)
    f_ra = np.mean((h - cfg.h_bs) ** 3 * h**3 * (n0 * nk) ** -3.0)
    return float(f_pl), float(f_ra)
