"""Small-scale fading, path loss, IRS radiation pattern and cascaded channels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Placement, ScenarioConfig, distance_vectors


@dataclass(frozen=True)
class ChannelRealization:
    """Small-scale fading held fixed for one optimization run.

    G has shape (M, N) (BS to IRS); g has shape (K, M), row k being g_k.
    """

    G: np.ndarray
    g: np.ndarray

    @property
    def n_irs(self) -> int:
        return self.G.shape[0]

    @property
    def n_bs(self) -> int:
        return self.G.shape[1]

    @property
    def n_ues(self) -> int:
        return self.g.shape[0]


@dataclass(frozen=True)
class LargeScaleFactors:
    beta_0: float
    beta_k: np.ndarray
    f_theta_0: float
    f_theta_k: np.ndarray

    @property
    def cascade_gain(self) -> np.ndarray:
        """Per-UE product F(theta_0) beta_0 F(theta_k) beta_k."""
        return self.f_theta_0 * self.beta_0 * self.f_theta_k * self.beta_k


def radiation_pattern(theta):
    """cos^3 element gain for elevation ``theta`` in [0, pi]; zero past pi/2."""
    theta = np.asarray(theta, dtype=float)
    if np.any((theta < 0.0) | (theta > np.pi)) or np.any(np.isnan(theta)):
        raise ValueError("elevation angle must lie in [0, pi]")
    out = np.where(theta <= np.pi / 2, np.cos(theta) ** 3, 0.0)
    return float(out) if out.ndim == 0 else out


def pattern_toward(boresight: np.ndarray, direction: np.ndarray):
    """Radiation pattern toward ``direction`` (rows allowed) for a given boresight."""
    direction = np.atleast_2d(direction)
    cos = direction @ boresight / np.linalg.norm(direction, axis=1)
    theta = np.arccos(np.clip(cos, -1.0, 1.0))
    return radiation_pattern(theta)


def path_loss(d_norm, alpha: float, c0: float):
    """Distance-power law ``c0 * d**(-alpha)`` with ``c0`` the gain at 1 m."""
    d = np.asarray(d_norm, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = c0 * d ** (-alpha)
    return float(out) if out.ndim == 0 else out


def geometric_pattern_factors(p: Placement, cfg: ScenarioConfig) -> tuple[float, np.ndarray]:
    """F(theta_0), F(theta_k) for a downward-facing IRS from the altitude form.

    Uses (h - h_BS)^3/|d_0|^3 and h^3/|d_k|^3, which coincide with the
    elevation-angle form of the pattern.
    """
    h = p.uav_position[2]
    if h <= cfg.h_bs:
        raise ValueError("UAV must fly above the BS")
    d0, dk = distance_vectors(p, cfg)
    f0 = (h - cfg.h_bs) ** 3 / np.linalg.norm(d0) ** 3
    fk = h**3 / np.linalg.norm(dk, axis=1) ** 3
    return float(f0), fk


def large_scale_factors(p: Placement, cfg: ScenarioConfig) -> LargeScaleFactors:
    d0, dk = distance_vectors(p, cfg)
    f0 = pattern_toward(p.irs_normal, -d0)[0]
    fk = pattern_toward(p.irs_normal, -dk)
    beta_0 = path_loss(np.linalg.norm(d0), cfg.alpha_bs_uav, cfg.c0)
    beta_k = path_loss(np.linalg.norm(dk, axis=1), cfg.alpha_uav_ue, cfg.c0)
    return LargeScaleFactors(beta_0, np.atleast_1d(beta_k), float(f0), np.atleast_1d(fk))


def cascade_gain(p: Placement, cfg: ScenarioConfig) -> np.ndarray:
    return large_scale_factors(p, cfg).cascade_gain


def effective_scalar_channel(g_k, phi, G, w_l) -> complex:
    """g_k^H diag(phi) G w_l."""
    g_k, phi, w_l = (np.asarray(a) for a in (g_k, phi, w_l))
    G = np.atleast_2d(G)
    if g_k.shape != phi.shape or G.shape != (phi.size, w_l.size):
        raise ValueError("shape mismatch in cascaded channel")
    return complex(np.vdot(g_k, phi * (G @ w_l)))


def cascaded_rows(G: np.ndarray, g: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Rows h_k^H = g_k^H diag(phi) G, shape (K, N)."""
    return (g.conj() * phi[None, :]) @ G


# -- line-of-sight structure -------------------------------------------------

def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def upa_shape(m: int) -> tuple[int, int]:
    """Most square factorisation rows x cols of ``m`` with rows <= cols."""
    rows = int(np.floor(np.sqrt(m)))
    while m % rows:
        rows -= 1
    return rows, m // rows


def ula_response(n: int, axis, direction) -> np.ndarray:
    """Half-wavelength ULA response toward ``direction``."""
    cos = float(_unit(axis) @ _unit(direction))
    return np.exp(1j * np.pi * np.arange(n) * cos)


def upa_response(m: int, axis_a, axis_b, direction) -> np.ndarray:
    """Half-wavelength UPA response (row-major over the two in-plane axes)."""
    rows, cols = upa_shape(m)
    u = _unit(direction)
    ca, cb = float(_unit(axis_a) @ u), float(_unit(axis_b) @ u)
    ia, ib = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    return np.exp(1j * np.pi * (ia * ca + ib * cb)).ravel()


def irs_plane_axes(normal) -> tuple[np.ndarray, np.ndarray]:
    normal = _unit(normal)
    if abs(normal[2]) > 0.999:
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    horiz = _unit(np.cross([0.0, 0.0, 1.0], normal))
    return horiz, np.array([0.0, 0.0, 1.0])


def los_components(cfg: ScenarioConfig, p: Placement) -> tuple[np.ndarray, np.ndarray]:
    """Unit-modulus LOS parts of G (M x N) and g (K x M) for the given geometry."""
    m, n = cfg.n_irs_elements, cfg.n_bs_antennas
    bs = np.asarray(cfg.bs_position)
    irs = p.uav_position
    ax_a, ax_b = irs_plane_axes(p.irs_normal)
    bs_axis = np.array([1.0, 0.0, 0.0])
    a_bs = ula_response(n, bs_axis, irs - bs)
    a_irs = upa_response(m, ax_a, ax_b, bs - irs)
    G_los = np.outer(a_irs, a_bs.conj())
    g_los = np.stack([upa_response(m, ax_a, ax_b, ue - irs) for ue in p.ue_positions])
    return G_los, g_los


def sample_rician(rows: int, cols: int, k_factor: float, los_component, rng: np.random.Generator) -> np.ndarray:
    """sqrt(k/(1+k)) LOS + sqrt(1/(1+k)) CN(0, 1), unit average power per entry."""
    if k_factor < 0:
        raise ValueError("K-factor must be nonnegative")
    los = np.asarray(los_component, dtype=complex)
    if los.shape != (rows, cols):
        raise ValueError(f"LOS shape {los.shape} != {(rows, cols)}")
    nlos = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)
    if np.isinf(k_factor):
        return los.copy()
    return np.sqrt(k_factor / (1.0 + k_factor)) * los + np.sqrt(1.0 / (1.0 + k_factor)) * nlos


def generate_channel(cfg: ScenarioConfig, p: Placement, rng: np.random.Generator) -> ChannelRealization:
    """Draw one realization; LOS steering is evaluated at ``p`` and then frozen."""
    G_los, g_los = los_components(cfg, p)
    m, n, k = cfg.n_irs_elements, cfg.n_bs_antennas, len(p.ue_positions)
    G = sample_rician(m, n, cfg.rician_k_bs_uav, G_los, rng)
    g = sample_rician(k, m, cfg.rician_k_uav_ue, g_los, rng)
    return ChannelRealization(G, g)


def dump_channel(ch: ChannelRealization) -> str:
    """Row-major textual dump with ``re,im`` pairs, 17 significant digits."""
    lines = []
    for name, mat in (("G", ch.G), ("g", ch.g)):
        lines.append(f"{name} {mat.shape[0]} {mat.shape[1]}")
        for row in mat:
            lines.append(" ".join(f"{z.real:.17g},{z.imag:.17g}" for z in row))
    return "\n".join(lines) + "\n"


def parse_channel(text: str) -> ChannelRealization:
    lines = iter(text.strip().splitlines())
    mats = {}
    for header in lines:
        name, r, c = header.split()
        rows = []
        for _ in range(int(r)):
            pairs = next(lines).split()
            rows.append([complex(float(a), float(b)) for a, b in (p.split(",") for p in pairs)])
        mats[name] = np.array(rows, dtype=complex).reshape(int(r), int(c))
    return ChannelRealization(mats["G"], mats["g"])
