"""Adapters from :class:`ConicProgram` to Clarabel and SCS."""
from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp

from .program import ConicProgram, ProgramError, SolveResult

BACKENDS = ("clarabel", "scs")

# settings tried in order when the interior-point method stalls
_CLARABEL_LADDER = (
    {},
    {"equilibrate_enable": False},
    {"max_step_fraction": 0.9},
)


def _lowered_rows(program: ConicProgram, rhs_relax: float = 0.0):
    """Yield (cone, m, rows, cols, vals, b, param) in solver cone form.

    Rotated cones become standard ones via (y + z, y - z, 2x). ``rhs_relax``
    loosens every constraint by adding to its bounding entries; an equality
    becomes a two-sided band of that width.
    """
    for c in program.constraints:
        e = c.expr
        rows, cols, vals, b = e.rows, e.cols, e.vals, e.const.copy()
        cone, m = c.cone, e.m
        if cone == "rsoc":
            first, second, rest = rows == 0, rows == 1, rows >= 2
            rows = np.concatenate([np.zeros(first.sum() + second.sum(), dtype=np.int64),
                                   np.ones(first.sum() + second.sum(), dtype=np.int64), rows[rest]])
            cols = np.concatenate([e.cols[first], e.cols[second], e.cols[first], e.cols[second], e.cols[rest]])
            vals = np.concatenate([e.vals[first], e.vals[second], e.vals[first], -e.vals[second],
                                   2.0 * e.vals[rest]])
            b = np.concatenate([[b[0] + b[1], b[0] - b[1]], 2.0 * b[2:]])
            cone = "soc"
        if rhs_relax:
            if cone == "nonneg":
                b = b + rhs_relax
            elif cone == "soc":
                b[0] += rhs_relax
            elif cone == "pow":
                b[:2] += rhs_relax
            elif cone == "exp":
                b[2] += rhs_relax
            elif cone == "zero":
                yield ("nonneg", 2 * m, np.concatenate([rows, rows + m]), np.concatenate([cols, cols]),
                       np.concatenate([vals, -vals]), np.concatenate([b, -b]) + rhs_relax, None)
                continue
        yield cone, m, rows, cols, vals, b, c.param


def _assemble(program: ConicProgram, items) -> tuple[sp.csc_matrix, np.ndarray]:
    """Stack lowered blocks into the solver form A x + s = b with s = A_e x + b_e."""
    rows, cols, vals, rhs, off = [], [], [], [], 0
    for _, m, r, c, v, b, _ in items:
        rows.append(r + off)
        cols.append(c)
        vals.append(v)
        rhs.append(b)
        off += m
    if not items:
        return sp.csc_matrix((0, program.n)), np.zeros(0)
    A = sp.csc_matrix((-np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(off, program.n))
    return A, np.concatenate(rhs)


def _objective(program: ConicProgram) -> np.ndarray:
    c = np.zeros(program.n)
    np.add.at(c, program.objective.cols, program.objective.vals)
    return c


def _solve_clarabel(program, tol, max_iter, rhs_relax):
    import clarabel

    items = list(_lowered_rows(program, rhs_relax))
    cones = []
    for cone, m, *_, param in items:
        if cone == "zero":
            cones.append(clarabel.ZeroConeT(m))
        elif cone == "nonneg":
            cones.append(clarabel.NonnegativeConeT(m))
        elif cone == "soc":
            cones.append(clarabel.SecondOrderConeT(m))
        elif cone == "pow":
            cones.append(clarabel.PowerConeT(param))
        elif cone == "exp":
            cones.append(clarabel.ExponentialConeT())
        else:
            raise ProgramError(cone)
    n = program.n
    A, b = _assemble(program, items)
    P = sp.csc_matrix((n, n))
    q = -_objective(program)

    t0 = time.perf_counter()
    iters = 0
    fallback = None
    for overrides in _CLARABEL_LADDER:
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_gap_abs = tol
        settings.tol_gap_rel = tol
        settings.tol_feas = tol
        settings.max_iter = max_iter
        for key, val in overrides.items():
            setattr(settings, key, val)
        sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
        iters += int(sol.iterations)
        raw = str(sol.status).split(".")[-1]
        if raw == "Solved":
            status = "optimal"
            break
        if raw in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            status = "infeasible"
            break
        # near-optimal exits are kept as a fallback; callers re-verify residuals
        if raw == "AlmostSolved" and fallback is None:
            fallback = sol
        status = "numerical-limit"
    else:
        if fallback is not None:
            sol, raw, status = fallback, "AlmostSolved", "optimal"
    wall = time.perf_counter() - t0
    x = np.asarray(sol.x, dtype=float)
    return status, x, iters, wall, raw


def _solve_scs(program, tol, max_iter, rhs_relax):
    import scs

    order = ("zero", "nonneg", "soc", "exp", "pow")
    items = sorted(_lowered_rows(program, rhs_relax), key=lambda it: order.index(it[0]))
    cone_spec: dict = {}
    for kind in order:
        block = [it for it in items if it[0] == kind]
        if not block:
            continue
        if kind == "zero":
            cone_spec["z"] = sum(it[1] for it in block)
        elif kind == "nonneg":
            cone_spec["l"] = sum(it[1] for it in block)
        elif kind == "soc":
            cone_spec["q"] = [it[1] for it in block]
        elif kind == "exp":
            cone_spec["ep"] = len(block)
        else:
            cone_spec["p"] = [it[6] for it in block]
    n = program.n
    A, b = _assemble(program, items)
    data = {"A": A, "b": b, "c": -_objective(program), "P": sp.csc_matrix((n, n))}
    solver = scs.SCS(data, cone_spec, verbose=False, eps_abs=tol, eps_rel=tol, max_iters=max_iter * 500)
    t0 = time.perf_counter()
    sol = solver.solve()
    wall = time.perf_counter() - t0
    raw = sol["info"]["status"]
    if raw == "solved":
        status = "optimal"
    elif "infeasible" in raw and "inaccurate" not in raw:
        status = "infeasible"
    else:
        status = "numerical-limit"
    x = np.asarray(sol["x"], dtype=float) if sol["x"] is not None else np.full(n, np.nan)
    return status, x, int(sol["info"]["iter"]), wall, raw


def solve(program: ConicProgram, backend: str = "clarabel", tol: float = 1e-8, max_iter: int = 200,
          rhs_relax: float = 0.0) -> SolveResult:
    """Maximize ``program``; never raises on solver trouble, reports it in ``status``."""
    if backend == "clarabel":
        status, x, it, wall, raw = _solve_clarabel(program, tol, max_iter, rhs_relax)
    elif backend == "scs":
        status, x, it, wall, raw = _solve_scs(program, tol, max_iter, rhs_relax)
    else:
        raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if status == "optimal" and not np.all(np.isfinite(x)):
        status = "numerical-limit"
    obj = program.objective_value(x) if np.all(np.isfinite(x)) else float("nan")
    return SolveResult(status, obj, x, it, wall, backend, raw)
