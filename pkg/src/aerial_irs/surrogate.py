"""Inner-approximation bounds and the expansion point they are built around.

Every evaluator receives its expansion point explicitly, so the constraint
builders and the property tests go through the same formulas.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .channel import ChannelRealization, cascade_gain
from .metrics import NetworkState, amplitudes
from .scenario import Placement, ScenarioConfig, distance_vectors


def lb_quad_over_lin(x, y, x0, y0):
    """Tangent minorant of |x|^2 / y at (x0, y0)."""
    y = np.asarray(y, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if np.any(y <= 0) or np.any(y0 <= 0):
        raise ValueError("denominator must be positive")
    return 2.0 * np.real(np.conj(x0) * x) / y0 - np.abs(x0) ** 2 * y / y0**2


def ub_mul(x, y, x0, y0):
    """Convex majorant of x*y for positive arguments, tight at (x0, y0)."""
    args = [np.asarray(a, dtype=float) for a in (x, y, x0, y0)]
    if any(np.any(a <= 0) for a in args):
        raise ValueError("ub_mul needs positive arguments")
    x, y, x0, y0 = args
    return y0 / (2.0 * x0) * x**2 + x0 / (2.0 * y0) * y**2


def lb_quad(x, x0):
    """Linear minorant of ||x||^2 at x0 (complex vectors allowed)."""
    x, x0 = np.asarray(x), np.asarray(x0)
    if x.shape != x0.shape:
        raise ValueError("shape mismatch")
    return float(2.0 * np.real(np.vdot(x0, x)) - np.vdot(x0, x0).real)


def lb_pow(x, a, x0):
    """Tangent line of x**a (a >= 1) at x0."""
    x, x0 = np.asarray(x, dtype=float), np.asarray(x0, dtype=float)
    if a < 1 or np.any(x <= 0) or np.any(x0 <= 0):
        raise ValueError("lb_pow needs x, x0 > 0 and a >= 1")
    return a * x0 ** (a - 1) * x - (a - 1) * x0**a


def psi(tau_row, mu_k, c0):
    """Interference-plus-noise surrogate c0^2 sum(tau) + mu."""
    tau_row = np.asarray(tau_row, dtype=float)
    if np.any(tau_row < 0) or mu_k < 0:
        raise ValueError("psi arguments must be nonnegative")
    return c0**2 * float(np.sum(tau_row)) + float(mu_k)


def sinr_linear_lb(omega_k, tau_row, mu_k, omega0, psi0, c0):
    """Linear minorant of c0^2 omega^2 / psi(tau, mu) around (omega0, psi0)."""
    if psi0 <= 0:
        raise ValueError("psi at the expansion point must be positive")
    a1 = 2.0 * c0**2 * omega0 * omega_k / psi0
    a2 = c0**2 * omega0**2 / psi0**2 * psi(tau_row, mu_k, c0)
    return a1 - a2


def f_s(w_k, phi, zeta_up, w0, phi0, zeta0, g_k, G):
    """Minorant of |g_k^H Phi G w_k|^2 / zeta_up around (w0, phi0, zeta0)."""
    a = np.vdot(g_k, phi * (G @ w_k))
    a0 = np.vdot(g_k, phi0 * (G @ w0))
    return float(lb_quad_over_lin(a, zeta_up, a0, zeta0))


@dataclass(frozen=True)
class SurrogatePoint:
    """All decision and auxiliary values at an expansion point.

    Link-indexed arrays (length K+1) put the BS link first. ``tau`` is K x K
    with an unused diagonal. For a fixed-geometry deployment the distance
    auxiliaries are NaN and ``zeta_up``/``zeta_low``/``mu`` hold the constant
    gain-equivalent values.
    """

    w: np.ndarray
    phi: np.ndarray
    uav: np.ndarray
    rho_up: np.ndarray
    zeta_up: np.ndarray
    rho_low: np.ndarray
    rho_tilde_low: np.ndarray
    rho_bar_low: np.ndarray
    zeta_low: np.ndarray
    mu: np.ndarray
    upsilon: float
    lam: np.ndarray
    tau: np.ndarray
    omega: np.ndarray
    t1: float
    t2: float

    @property
    def state(self) -> NetworkState:
        return NetworkState(self.w, self.phi, self.uav)

    def psi(self, c0: float) -> np.ndarray:
        off = self.tau.copy()
        np.fill_diagonal(off, 0.0)
        return c0**2 * off.sum(axis=1) + self.mu

    def with_values(self, **changes) -> "SurrogatePoint":
        return replace(self, **changes)

    def allclose(self, other: "SurrogatePoint", rtol=1e-9) -> bool:
        return all(np.allclose(getattr(self, f.name), getattr(other, f.name), rtol=rtol, equal_nan=True)
                   for f in fields(self))


def link_exponents(cfg: ScenarioConfig) -> np.ndarray:
    """Effective exponents 3 + alpha for the BS link then each UE link."""
    return np.concatenate([[3.0 + cfg.alpha_bs_uav], np.full(cfg.n_ues, 3.0 + cfg.alpha_uav_ue)])


def tight_point(state: NetworkState, ch: ChannelRealization, p: Placement, cfg: ScenarioConfig,
                fixed_geometry: bool = False) -> SurrogatePoint:
    """Expansion point whose auxiliaries sit exactly at their defining values.

    At such a point the surrogate SINR equals the true SINR, so ``lam`` is the
    exact SINR of ``state``.
    """
    k = cfg.n_ues
    q = p.moved_to(state.uav_position)
    nan_links = np.full(k + 1, np.nan)
    if fixed_geometry:
        gain = cascade_gain(q, cfg)
        zeta = cfg.c0**2 / gain
        mu = np.full(k, cfg.noise_power)
        rho, rho_tilde, rho_bar = nan_links, nan_links, np.full(k, np.nan)
        upsilon = t1 = t2 = np.nan
        zeta_up = zeta_low = zeta
    else:
        d0, dk = distance_vectors(q, cfg)
        norms = np.concatenate([[np.linalg.norm(d0)], np.linalg.norm(dk, axis=1)])
        rho = norms ** link_exponents(cfg)
        rho_tilde = norms**2
        zeta_up = zeta_low = rho[0] * rho[1:]
        rho_bar = np.sqrt(zeta_low)
        h = q.uav_position[2]
        t1, t2 = h**3, (h - cfg.h_bs) ** 3
        upsilon = float(np.sqrt(t1 * t2))
        mu = np.full(k, cfg.noise_power / upsilon**2)
    amp = np.abs(amplitudes(state, ch)) ** 2
    tau = amp / zeta_low[:, None]
    np.fill_diagonal(tau, 0.0)
    omega = np.sqrt(np.diag(amp) / zeta_up)
    psi_k = cfg.c0**2 * tau.sum(axis=1) + mu
    lam = cfg.c0**2 * omega**2 / psi_k
    return SurrogatePoint(
        w=state.w.copy(), phi=state.phi.copy(), uav=state.uav_position.copy(),
        rho_up=rho.copy(), zeta_up=np.array(zeta_up, dtype=float), rho_low=rho.copy(),
        rho_tilde_low=rho_tilde, rho_bar_low=rho_bar, zeta_low=np.array(zeta_low, dtype=float),
        mu=mu, upsilon=float(upsilon), lam=lam, tau=tau, omega=omega, t1=float(t1), t2=float(t2),
    )


def surrogate_sinr(point: SurrogatePoint, ch: ChannelRealization, cfg: ScenarioConfig) -> np.ndarray:
    """SINR surrogate evaluated with the point's zeta/mu bounds."""
    amp = np.abs(amplitudes(point.state, ch)) ** 2
    c2 = cfg.c0**2
    signal = c2 * np.diag(amp) / point.zeta_up
    interference = c2 * (amp.sum(axis=1) - np.diag(amp)) / point.zeta_low
    return signal / (interference + point.mu)
