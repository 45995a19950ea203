"""Solver-agnostic conic program representation.

Expressions are sparse affine maps ``A x + b`` stored as coordinate triplets,
so adding or scaling them never touches a dense matrix. Constraints place one
affine expression in one cone:

====== =========================================================
zero   e == 0
nonneg e >= 0
soc    e[0] >= ||e[1:]||
rsoc   e[0] * e[1] >= ||e[2:]||^2,  e[0], e[1] >= 0
pow    e[0]**a * e[1]**(1-a) >= |e[2]|,  e[0], e[1] >= 0
exp    e[1] * exp(e[0] / e[1]) <= e[2],  e[1] > 0
====== =========================================================
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

CONES = ("zero", "nonneg", "soc", "rsoc", "pow", "exp")


class Affine:
    __slots__ = ("m", "rows", "cols", "vals", "const")
    # make numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, m, rows, cols, vals, const):
        self.m = int(m)
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=float)
        self.const = np.asarray(const, dtype=float).reshape(self.m)

    @classmethod
    def constant(cls, values) -> "Affine":
        values = np.atleast_1d(np.asarray(values, dtype=float))
        empty = np.zeros(0)
        return cls(values.size, empty, empty, empty, values)

    @classmethod
    def from_dense(cls, mat, cols, const=None) -> "Affine":
        """Rows of ``mat`` act on program columns ``cols``."""
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        r, c = np.nonzero(mat)
        cols = np.asarray(cols, dtype=np.int64)
        const = np.zeros(mat.shape[0]) if const is None else const
        return cls(mat.shape[0], r, cols[c], mat[r, c], const)

    def _coerce(self, other) -> "Affine":
        if isinstance(other, Affine):
            if other.m != self.m:
                raise ValueError(f"dimension mismatch {self.m} vs {other.m}")
            return other
        const = np.broadcast_to(np.asarray(other, dtype=float), (self.m,))
        return Affine.constant(const)

    def __add__(self, other) -> "Affine":
        o = self._coerce(other)
        return Affine(self.m, np.concatenate([self.rows, o.rows]), np.concatenate([self.cols, o.cols]),
                      np.concatenate([self.vals, o.vals]), self.const + o.const)

    __radd__ = __add__

    def __neg__(self) -> "Affine":
        return Affine(self.m, self.rows, self.cols, -self.vals, -self.const)

    def __sub__(self, other) -> "Affine":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Affine":
        return self._coerce(other) - self

    def __mul__(self, scalar) -> "Affine":
        s = np.asarray(scalar, dtype=float)
        if s.ndim == 0:
            return Affine(self.m, self.rows, self.cols, self.vals * s, self.const * s)
        s = np.broadcast_to(s, (self.m,))
        return Affine(self.m, self.rows, self.cols, self.vals * s[self.rows], self.const * s)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "Affine":
        return self * (1.0 / np.asarray(scalar, dtype=float))

    def __getitem__(self, idx) -> "Affine":
        sel = np.arange(self.m)[idx]
        sel = np.atleast_1d(sel)
        remap = np.full(self.m, -1)
        remap[sel] = np.arange(sel.size)
        keep = remap[self.rows] >= 0
        return Affine(sel.size, remap[self.rows[keep]], self.cols[keep], self.vals[keep], self.const[sel])

    def __rmatmul__(self, mat) -> "Affine":
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        if mat.shape[1] != self.m:
            raise ValueError("matmul dimension mismatch")
        p = mat.shape[0]
        rows = np.repeat(np.arange(p), self.vals.size)
        cols = np.tile(self.cols, p)
        vals = (mat[:, self.rows] * self.vals).ravel()
        return Affine(p, rows, cols, vals, mat @ self.const).canonical()

    def sum(self) -> "Affine":
        return Affine(1, np.zeros_like(self.rows), self.cols, self.vals, [self.const.sum()])

    def canonical(self) -> "Affine":
        """Merge duplicate entries, drop zeros, order by (row, col)."""
        if self.vals.size == 0:
            return self
        key = self.rows * (int(self.cols.max()) + 1) + self.cols
        uniq, inv = np.unique(key, return_inverse=True)
        vals = np.zeros(uniq.size)
        np.add.at(vals, inv, self.vals)
        ncol = int(self.cols.max()) + 1
        rows, cols = uniq // ncol, uniq % ncol
        nz = vals != 0.0
        return Affine(self.m, rows[nz], cols[nz], vals[nz], self.const)

    def evaluate(self, x) -> np.ndarray:
        out = self.const.copy()
        np.add.at(out, self.rows, self.vals * np.asarray(x)[self.cols])
        return out

    def to_sparse(self, n: int) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.m, n))

    def same_as(self, other: "Affine") -> bool:
        a, b = self.canonical(), other.canonical()
        return (a.m == b.m and np.array_equal(a.rows, b.rows) and np.array_equal(a.cols, b.cols)
                and np.array_equal(a.vals, b.vals) and np.array_equal(a.const, b.const))


def vstack(*exprs: Affine) -> Affine:
    rows, cols, vals, consts, off = [], [], [], [], 0
    for e in exprs:
        rows.append(e.rows + off)
        cols.append(e.cols)
        vals.append(e.vals)
        consts.append(e.const)
        off += e.m
    return Affine(off, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), np.concatenate(consts))


@dataclass
class Variable:
    name: str
    start: int
    size: int
    scale: np.ndarray
    role: str = "model"

    @property
    def cols(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.size)


@dataclass
class Constraint:
    cone: str
    expr: Affine
    param: float | None = None
    name: str = ""
    group: str = ""
    logical: str = ""


class ProgramError(ValueError):
    pass


@dataclass
class ConicProgram:
    """Maximize a linear objective subject to conic constraints.

    Solver values relate to modelled quantities through each variable's
    ``scale`` (modelled = scale * solver value).
    """

    name: str = ""
    variables: dict[str, Variable] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    objective: Affine = field(default_factory=lambda: Affine.constant([0.0]))
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        if not self.variables:
            return 0
        last = next(reversed(self.variables.values()))
        return last.start + last.size

    def add_variable(self, name: str, size: int, scale=1.0, role: str = "model") -> Affine:
        if name in self.variables:
            raise ProgramError(f"variable {name!r} declared twice")
        scale = np.broadcast_to(np.asarray(scale, dtype=float), (size,)).copy()
        if np.any(~np.isfinite(scale)) or np.any(scale <= 0):
            raise ProgramError(f"variable {name!r} needs positive finite scales")
        self.variables[name] = Variable(name, self.n, int(size), scale, role)
        return self.var(name)

    def var(self, name: str) -> Affine:
        v = self.variables[name]
        return Affine(v.size, np.arange(v.size), v.cols, np.ones(v.size), np.zeros(v.size))

    def add(self, cone: str, expr: Affine, *, param=None, name="", group="", logical=None) -> Constraint:
        if cone not in CONES:
            raise ProgramError(f"unknown cone {cone!r}")
        need = {"pow": 3, "exp": 3}.get(cone)
        if need is not None and expr.m != need:
            raise ProgramError(f"{cone} cone needs dimension {need}, got {expr.m}")
        if cone == "rsoc" and expr.m < 2:
            raise ProgramError("rsoc needs dimension >= 2")
        if cone == "soc" and expr.m < 1:
            raise ProgramError("soc needs dimension >= 1")
        if cone == "pow" and not (param is not None and 0.0 < param < 1.0):
            raise ProgramError("power cone exponent must lie in (0, 1)")
        if expr.cols.size and (expr.cols.min() < 0 or expr.cols.max() >= self.n):
            raise ProgramError(f"constraint {name!r} references undeclared columns")
        c = Constraint(cone, expr.canonical(), None if param is None else float(param), name, group,
                       name if logical is None else logical)
        self.constraints.append(c)
        return c

    def maximize(self, expr: Affine) -> None:
        if expr.m != 1:
            raise ProgramError("objective must be scalar")
        self.objective = expr.canonical()

    def split(self, x) -> dict[str, np.ndarray]:
        """Solver-unit values per variable."""
        return {name: np.asarray(x[v.start:v.start + v.size]) for name, v in self.variables.items()}

    def modelled(self, x, name: str) -> np.ndarray:
        v = self.variables[name]
        return np.asarray(x[v.start:v.start + v.size]) * v.scale

    def objective_value(self, x) -> float:
        return float(self.objective.evaluate(x)[0])

    def tally(self, role: str | None = "model") -> dict[str, int]:
        return {n: v.size for n, v in self.variables.items() if role is None or v.role == role}

    def logical_counts(self) -> dict[str, int]:
        """Number of distinct logical constraints per group."""
        seen: dict[str, set] = {}
        for c in self.constraints:
            seen.setdefault(c.group, set()).add(c.logical)
        return {g: len(s) for g, s in seen.items()}


def add_power_cone_norm(program: ConicProgram, d: Affine, a_bar: float, bound: Affine,
                        name: str = "", group: str = "", logical=None, scale: float = 1.0) -> Affine:
    """Encode ||d||**a_bar <= bound exactly.

    Adds t with ||d|| <= t (second-order cone) and t <= bound**(1/a_bar)
    (power cone with a unit second slot). ``scale`` divides ``d`` and
    ``t`` uniformly, which leaves the feasible set unchanged when ``bound`` is
    expressed in units of ``scale**a_bar``.
    """
    if a_bar < 1:
        raise ProgramError("exponent must be >= 1")
    logical = name if logical is None else logical
    t = program.add_variable(f"{name}.t" if name else f"_pow_t{len(program.variables)}", 1, role="lowering")
    one = Affine.constant([1.0])
    if a_bar == 1:
        program.add("nonneg", bound - t, name=f"{name}.lin", group=group, logical=logical)
    else:
        program.add("pow", vstack(bound, one, t), param=1.0 / a_bar, name=f"{name}.pow", group=group,
                    logical=logical)
    program.add("soc", vstack(t, d / scale), name=f"{name}.soc", group=group, logical=logical)
    return t


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | numerical-limit
    objective: float
    x: np.ndarray
    iterations: int
    wall_time: float
    backend: str = ""
    raw_status: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# -- independent residual check ----------------------------------------------

def cone_residual(cone: str, e: np.ndarray, param=None) -> float:
    """Distance-like violation of ``e`` in the cone (0 when inside)."""
    if cone == "zero":
        return float(np.max(np.abs(e), initial=0.0))
    if cone == "nonneg":
        return float(max(0.0, -np.min(e, initial=0.0)))
    if cone == "soc":
        return float(max(0.0, np.linalg.norm(e[1:]) - e[0]))
    if cone == "rsoc":
        y, z, x = e[0], e[1], e[2:]
        viol = np.linalg.norm(np.concatenate([[y - z], 2 * x])) - (y + z)
        return float(max(0.0, viol / 2.0, -y, -z))
    if cone == "pow":
        x, y, z = e
        if x < 0 or y < 0:
            return float(max(-x, -y))
        return float(max(0.0, abs(z) - x**param * y ** (1 - param)))
    if cone == "exp":
        x, y, z = e
        if y > 0:
            with np.errstate(over="ignore"):
                lhs = y * np.exp(x / y)
            return float(max(0.0, lhs - z))
        return float(max(-y, x if y == 0 else np.inf, -z, 0.0))
    raise ProgramError(cone)


@dataclass
class ResidualReport:
    residuals: list[tuple[str, str, float]]
    tol: float

    @property
    def max_residual(self) -> float:
        return max((r for _, _, r in self.residuals), default=0.0)

    @property
    def violations(self) -> list[tuple[str, str, float]]:
        return [r for r in self.residuals if r[2] > self.tol]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_solution(program: ConicProgram, result, tol: float = 1e-6) -> ResidualReport:
    """Recompute every cone residual from the raw assignment."""
    x = result.x if isinstance(result, SolveResult) else np.asarray(result)
    out = [(c.name, c.cone, cone_residual(c.cone, c.expr.evaluate(x), c.param)) for c in program.constraints]
    return ResidualReport(out, tol)
