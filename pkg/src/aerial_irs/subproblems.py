"""Convex inner approximations built around an expansion point.

Three programs share one builder: beamforming + placement (phase fixed),
phase + placement (beamformers fixed) and the feasibility-restoring
initializer. Large-magnitude auxiliaries (distance powers, noise bounds) are
normalized by their value at the expansion point so the solver sees O(1)
numbers; ``ConicProgram.modelled`` maps them back.

Placement modes: ``free`` optimizes the 3-D UAV position, ``pinned`` fixes
the altitude, ``fixed`` removes placement entirely (terrestrial surface).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, cascaded_rows
from .conic import Affine, ConicProgram, SolveResult, add_power_cone_norm, solve, verify_solution, vstack
from .metrics import NetworkState, amplitudes
from .scenario import Placement, ScenarioConfig
from .surrogate import SurrogatePoint, link_exponents, tight_point

BEAMFORMING, PHASE, INITIALIZER = "BeamformingPlacement", "PhasePlacement", "Initializer"
MODES = ("free", "pinned", "fixed")

# groups that make up the closed-form constraint count
COUNTED_GROUPS = ("sinr_cut", "power", "reflection", "qos", "delta", "dist_up", "mul_up", "qu_low", "pow_low",
                  "rho_bar", "zeta_low", "noise", "alt_product", "interference", "signal")


class SubproblemError(RuntimeError):
    """Inconsistent expansion point or an unverifiable solution."""


@dataclass(frozen=True)
class SubproblemKind:
    tag: str
    fixed_block: np.ndarray

    def __post_init__(self):
        if self.tag not in (BEAMFORMING, PHASE, INITIALIZER):
            raise ValueError(f"unknown subproblem {self.tag!r}")


def expected_constraint_count(k: int) -> int:
    return k * k + 9 * k + 5


def expected_variable_count(tag: str, k: int, n: int, m: int) -> int:
    """Real-valued auxiliaries plus complex decision entries, free placement."""
    block = m if tag == PHASE else n * k
    return k * k + 9 * k + block + 7


def constraint_count(program: ConicProgram) -> int:
    counts = program.logical_counts()
    return sum(counts.get(g, 0) for g in COUNTED_GROUPS)


def variable_count(program: ConicProgram) -> int:
    """Model variables with each complex entry counted once."""
    total = 0
    for v in program.variables.values():
        if v.role != "model" or v.name == "delta":
            continue
        total += v.size // 2 if v.name in ("w", "phi") else v.size
    return total


def _complex_map(coefs: np.ndarray, start: int, scale: float) -> Affine:
    """[Re, Im] of sum_j coefs[j] * z_j for an interleaved complex variable block."""
    coefs = np.asarray(coefs, dtype=complex)
    idx = np.arange(coefs.size)
    cols = np.concatenate([start + 2 * idx, start + 2 * idx + 1])
    mat = scale * np.vstack([np.concatenate([coefs.real, -coefs.imag]),
                             np.concatenate([coefs.imag, coefs.real])])
    return Affine.from_dense(mat, cols)


def _check_point(point: SurrogatePoint, cfg: ScenarioConfig, fixed_geometry: bool) -> np.ndarray:
    psi0 = point.psi(cfg.c0)
    if not np.all(psi0 > 0):
        raise SubproblemError("interference-plus-noise surrogate must be positive at the expansion point")
    pos = [point.zeta_up, point.zeta_low, point.mu]
    if not fixed_geometry:
        pos += [point.rho_up, point.rho_low, point.rho_tilde_low, point.rho_bar_low,
                [point.upsilon, point.t1, point.t2]]
    if not all(np.all(np.asarray(a) > 0) for a in pos):
        raise SubproblemError("expansion point auxiliaries must be positive")
    return psi0


def _build(tag: str, point: SurrogatePoint, ch: ChannelRealization, p: Placement, cfg: ScenarioConfig,
           mode: str) -> ConicProgram:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    fixed_geo = mode == "fixed"
    psi0 = _check_point(point, cfg, fixed_geo)
    K, N, M = cfg.n_ues, ch.n_bs, ch.n_irs
    c0sq = cfg.c0**2
    prog = ConicProgram(name=tag)
    prog.meta.update(tag=tag, mode=mode, point=point, ue_positions=p.ue_positions)
    one = Affine.constant([1.0])

    # decision block and the cascaded amplitudes a[k][l] as [Re, Im] affine maps
    if tag in (BEAMFORMING, INITIALIZER):
        sp_ = np.sqrt(cfg.p_bs_max)
        w_aff = prog.add_variable("w", 2 * N * K, scale=sp_)
        start = prog.variables["w"].start
        rows = cascaded_rows(ch.G, ch.g, point.phi)

        def amp(k, l):
            return _complex_map(rows[k], start + 2 * N * l, sp_)

        prog.add("soc", vstack(one, w_aff), name="power", group="power")
    else:
        phi_aff = prog.add_variable("phi", 2 * M)
        start = prog.variables["phi"].start
        gw = ch.G @ point.w.T

        def amp(k, l):
            return _complex_map(ch.g[k].conj() * gw[:, l], start, 1.0)

        for m_ in range(M):
            prog.add("soc", vstack(one, phi_aff[[2 * m_, 2 * m_ + 1]]), name=f"reflection.{m_}",
                     group="reflection", logical="reflection")

    # placement chain
    if fixed_geo:
        zeta_up = [one] * K
        zeta_low = [one] * K
        mu = [one] * K
    else:
        u = prog.add_variable("u", 3)
        u0 = point.uav
        lo = np.array([cfg.uav_x_range[0], cfg.uav_y_range[0], cfg.h_uav_min])
        hi = np.array([cfg.uav_x_range[1], cfg.uav_y_range[1], cfg.h_uav_max])
        if mode == "pinned":
            prog.add("nonneg", vstack(u[:2] - lo[:2], hi[:2] - u[:2]), name="box", group="box")
            prog.add("zero", u[2] - u0[2], name="altitude_pin", group="box")
        else:
            prog.add("nonneg", vstack(u - lo, hi - u), name="box", group="box")
        anchors = np.vstack([np.asarray(cfg.bs_position), p.ue_positions])
        abar = link_exponents(cfg)
        r = prog.add_variable("rho_up", K + 1, scale=point.rho_up)
        q = prog.add_variable("rho_tilde_low", K + 1, scale=point.rho_tilde_low)
        plow = prog.add_variable("rho_low", K + 1, scale=point.rho_low)
        for j in range(K + 1):
            d = u - anchors[j]
            add_power_cone_norm(prog, d, abar[j], r[j], name=f"dist_up.{j}", group="dist_up",
                                scale=point.rho_up[j] ** (1.0 / abar[j]))
            d0 = u0 - anchors[j]
            lin = (Affine.from_dense(2.0 * d0[None, :], prog.variables["u"].cols) - 2.0 * d0 @ anchors[j]
                   - d0 @ d0) / point.rho_tilde_low[j]
            prog.add("nonneg", lin - q[j], name=f"qu_low.{j}", group="qu_low")
            a = abar[j] / 2.0
            coef = point.rho_tilde_low[j] ** a / point.rho_low[j]
            prog.add("nonneg", coef * (a * q[j] - (a - 1.0)) - plow[j], name=f"pow_low.{j}", group="pow_low")

        zu = prog.add_variable("zeta_up", K, scale=point.zeta_up)
        b = prog.add_variable("rho_bar_low", K, scale=point.rho_bar_low)
        zl = prog.add_variable("zeta_low", K, scale=point.zeta_low)
        mu_v = prog.add_variable("mu", K, scale=point.mu)
        ups = prog.add_variable("upsilon", 1, scale=point.upsilon)
        for k in range(K):
            c = point.rho_up[0] * point.rho_up[k + 1] / (2.0 * point.zeta_up[k])
            prog.add("rsoc", vstack(zu[k], one, np.sqrt(c) * vstack(r[0], r[k + 1])), name=f"mul_up.{k}",
                     group="mul_up")
            c = point.rho_low[0] * point.rho_low[k + 1] / point.rho_bar_low[k] ** 2
            prog.add("rsoc", vstack(c * plow[0], plow[k + 1], b[k]), name=f"rho_bar.{k}", group="rho_bar")
            c = point.rho_bar_low[k] ** 2 / point.zeta_low[k]
            prog.add("nonneg", c * (2.0 * b[k] - 1.0) - zl[k], name=f"zeta_low.{k}", group="zeta_low")
            const = (cfg.noise_power / (point.mu[k] * point.upsilon**2)) ** (1.0 / 3.0)
            prog.add("pow", vstack(mu_v[k], ups, Affine.constant([const])), param=1.0 / 3.0,
                     name=f"noise.{k}", group="noise")

        t1 = prog.add_variable("t1", 1, scale=point.t1, role="lowering")
        t2 = prog.add_variable("t2", 1, scale=point.t2, role="lowering")
        h0, z0 = u0[2], u0[2] - cfg.h_bs
        h = u[2]
        prog.add("nonneg", (3 * h0**2 * h - 2 * h0**3) / point.t1 - t1, name="alt_product.t1",
                 group="alt_product", logical="alt_product")
        prog.add("nonneg", (3 * z0**2 * (h - cfg.h_bs) - 2 * z0**3) / point.t2 - t2, name="alt_product.t2",
                 group="alt_product", logical="alt_product")
        c = point.t1 * point.t2 / point.upsilon**2
        prog.add("rsoc", vstack(c * t1, t2, ups), name="alt_product.rsoc", group="alt_product",
                 logical="alt_product")
        zeta_up = [zu[k] for k in range(K)]
        zeta_low = [zl[k] for k in range(K)]
        mu = [mu_v[k] for k in range(K)]

    # SINR surrogate pieces
    a0 = amplitudes(point.state, ch)
    omega0 = point.omega
    s_omega = np.maximum(omega0, 1e-3 * np.sqrt(psi0) / cfg.c0)
    s_tau = psi0 / c0sq
    lam = prog.add_variable("lam", K)
    omega = prog.add_variable("omega", K, scale=s_omega)
    tau_scale = np.repeat(s_tau, K - 1) if K > 1 else np.ones(0)
    tau = prog.add_variable("tau", K * (K - 1), scale=tau_scale) if K > 1 else None

    for k in range(K):
        others = [l for l in range(K) if l != k]
        for i, l in enumerate(others):
            x = amp(k, l) / np.sqrt(point.zeta_low[k] * s_tau[k])
            prog.add("rsoc", vstack(zeta_low[k], tau[k * (K - 1) + i], x), name=f"interference.{k}.{l}",
                     group="interference")
        kappa = 1.0 / (point.zeta_up[k] * s_omega[k] ** 2)
        re_lin = np.array([[a0[k, k].real, a0[k, k].imag]]) @ amp(k, k)
        e0 = 2.0 * kappa * re_lin - kappa * abs(a0[k, k]) ** 2 * zeta_up[k]
        prog.add("rsoc", vstack(e0, one, omega[k]), name=f"signal.{k}", group="signal")

        gamma0 = c0sq * omega0[k] ** 2 / psi0[k]
        coef_a = 2.0 * c0sq * omega0[k] * s_omega[k] / psi0[k]
        interf = tau[k * (K - 1):(k + 1) * (K - 1)].sum() if K > 1 else Affine.constant([0.0])
        cut = coef_a * omega[k] - gamma0 * (interf + (point.mu[k] / psi0[k]) * mu[k]) - lam[k]
        prog.add("nonneg", cut, name=f"sinr_cut.{k}", group="sinr_cut")

    if tag == INITIALIZER:
        delta = prog.add_variable("delta", K)
        target = np.exp(cfg.qos_rate / cfg.bandwidth)
        for k in range(K):
            prog.add("nonneg", lam[k] + 1.0 - target - delta[k], name=f"delta.{k}", group="delta")
        prog.add("nonneg", -delta, name="delta_cap", group="delta_cap")
        prog.maximize(delta.sum())
    else:
        for k in range(K):
            prog.add("nonneg", lam[k] - cfg.qos_sinr, name=f"qos.{k}", group="qos")
        t = prog.add_variable("obj_t", K)
        for k in range(K):
            prog.add("exp", vstack(t[k], one, lam[k] + 1.0), name=f"objective.{k}", group="objective")
        prog.maximize(t.sum())
    return prog


def build_w_subproblem(point: SurrogatePoint, phi_fixed, ch: ChannelRealization, p: Placement,
                       cfg: ScenarioConfig, mode: str = "free") -> ConicProgram:
    """Beamformers and placement around ``point`` with the reflection vector held at ``phi_fixed``."""
    phi_fixed = np.asarray(phi_fixed, dtype=complex)
    if np.any(np.abs(phi_fixed) > 1 + 1e-8):
        raise SubproblemError("fixed reflection vector violates |phi| <= 1")
    return _build(BEAMFORMING, point.with_values(phi=phi_fixed), ch, p, cfg, mode)


def build_phi_subproblem(point: SurrogatePoint, w_fixed, ch: ChannelRealization, p: Placement,
                         cfg: ScenarioConfig, mode: str = "free") -> ConicProgram:
    """Reflection vector and placement around ``point`` with beamformers held at ``w_fixed``."""
    w_fixed = np.atleast_2d(np.asarray(w_fixed, dtype=complex))
    if np.sum(np.abs(w_fixed) ** 2) > cfg.p_bs_max * (1 + 1e-6):
        raise SubproblemError("fixed beamformers exceed the power budget")
    return _build(PHASE, point.with_values(w=w_fixed), ch, p, cfg, mode)


def build_initializer(point: SurrogatePoint, phi_random, ch: ChannelRealization, p: Placement,
                      cfg: ScenarioConfig, mode: str = "free") -> ConicProgram:
    """QoS-violation minimizer used to reach a feasible starting point."""
    phi_random = np.asarray(phi_random, dtype=complex)
    if np.any(np.abs(phi_random) > 1 + 1e-8):
        raise SubproblemError("reflection vector violates |phi| <= 1")
    return _build(INITIALIZER, point.with_values(phi=phi_random), ch, p, cfg, mode)


def build(tag: str, point: SurrogatePoint, ch, p, cfg, mode: str = "free") -> ConicProgram:
    if tag == BEAMFORMING:
        return build_w_subproblem(point, point.phi, ch, p, cfg, mode)
    if tag == PHASE:
        return build_phi_subproblem(point, point.w, ch, p, cfg, mode)
    return build_initializer(point, point.phi, ch, p, cfg, mode)


def point_assignment(program: ConicProgram, ch: ChannelRealization, cfg: ScenarioConfig) -> np.ndarray:
    """Solver-unit vector that places every variable at the program's expansion point.

    For a tight point this assignment is feasible, which is what makes the
    inner-approximation sequence well defined.
    """
    point = program.meta["point"]
    psi0 = point.psi(cfg.c0)
    x = np.zeros(program.n)

    def interleave(z):
        return np.column_stack([z.real, z.imag]).ravel()

    target = np.exp(cfg.qos_rate / cfg.bandwidth)
    values = {
        "w": lambda: interleave(point.w.ravel()) / np.sqrt(cfg.p_bs_max),
        "phi": lambda: interleave(point.phi),
        "u": lambda: point.uav,
        "lam": lambda: point.lam,
        "tau": lambda: point.tau[~np.eye(cfg.n_ues, dtype=bool)] / np.repeat(psi0 / cfg.c0**2, cfg.n_ues - 1),
        "obj_t": lambda: np.log1p(point.lam),
        "delta": lambda: np.minimum(0.0, point.lam + 1.0 - target),
    }
    anchors = np.vstack([np.asarray(cfg.bs_position), program.meta.get("ue_positions", np.zeros((0, 3)))])
    for name, v in program.variables.items():
        if name == "omega":
            x[v.cols] = point.omega / v.scale
        elif name in values:
            x[v.cols] = values[name]()
        elif name.startswith("dist_up."):
            j = int(name.split(".")[1])
            abar = link_exponents(cfg)[j]
            x[v.cols] = np.linalg.norm(point.uav - anchors[j]) / point.rho_up[j] ** (1.0 / abar)
        else:
            x[v.cols] = 1.0
    return x


def solve_verified(program: ConicProgram, backend: str = "clarabel", tol: float = 1e-8,
                   verify_tol: float = 1e-6) -> SolveResult:
    """Solve, retry once with right-hand sides relaxed by 1e-9, then verify residuals.

    Returns a result whose status is ``optimal`` only when the independent
    residual check passes.
    """
    res = solve(program, backend, tol)
    if res.status == "numerical-limit":
        res = solve(program, backend, tol, rhs_relax=1e-9)
    if res.status == "optimal" and not verify_solution(program, res, verify_tol).ok:
        res.status = "numerical-limit"
    return res


@dataclass
class Extraction:
    state: NetworkState
    point: SurrogatePoint
    lam: np.ndarray
    objective: float  # B * sum ln(1 + lam), or the summed QoS shortfall for the initializer
    delta: np.ndarray | None = None


def extract_point(program: ConicProgram, result: SolveResult, ch: ChannelRealization, p: Placement,
                  cfg: ScenarioConfig) -> Extraction:
    """Read back the decision blocks, re-verify them and rebuild a tight point."""
    if result.status != "optimal":
        raise SubproblemError(f"cannot extract from a {result.status} solve")
    x = result.x
    tag, mode, point = program.meta["tag"], program.meta["mode"], program.meta["point"]
    K, N = cfg.n_ues, ch.n_bs
    w, phi = point.w, point.phi
    if "w" in program.variables:
        raw = program.modelled(x, "w")
        w = (raw[0::2] + 1j * raw[1::2]).reshape(K, N)
        power = np.sum(np.abs(w) ** 2)
        if power > cfg.p_bs_max * (1 + 1e-6):
            raise SubproblemError("extracted beamformers exceed the power budget")
        if power > cfg.p_bs_max:
            w = w * np.sqrt(cfg.p_bs_max / power)
    if "phi" in program.variables:
        raw = program.modelled(x, "phi")
        phi = raw[0::2] + 1j * raw[1::2]
        mag = np.abs(phi)
        if np.any(mag > 1 + 1e-8):
            raise SubproblemError("extracted reflection vector violates |phi| <= 1")
        phi = np.where(mag > 1, phi / np.maximum(mag, 1.0), phi)
    uav = point.uav
    if "u" in program.variables:
        uav = program.modelled(x, "u").copy()
        lo = np.array([cfg.uav_x_range[0], cfg.uav_y_range[0], cfg.h_uav_min])
        hi = np.array([cfg.uav_x_range[1], cfg.uav_y_range[1], cfg.h_uav_max])
        if np.any(uav < lo - 1e-6) or np.any(uav > hi + 1e-6):
            raise SubproblemError("extracted UAV position leaves the flight box")
        uav = np.clip(uav, lo, hi)
        if mode == "pinned":
            uav[2] = point.uav[2]
    state = NetworkState(w, phi, uav)
    new_point = tight_point(state, ch, p, cfg, fixed_geometry=mode == "fixed")
    lam = program.modelled(x, "lam")
    if tag == INITIALIZER:
        delta = program.modelled(x, "delta")
        return Extraction(state, new_point, lam, float(np.sum(delta)), delta)
    return Extraction(state, new_point, lam, float(cfg.bandwidth * np.sum(np.log1p(lam))))
