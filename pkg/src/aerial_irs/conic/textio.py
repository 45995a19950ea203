"""Line-oriented text form of a :class:`ConicProgram` for golden-file regression.

::

    PROGRAM <name>
    VAR <name> <size> <role> <scale_0> ... <scale_{size-1}>
    OBJ | <const> | <row>:<var>[<idx>]:<coef> ...
    CON <cone> <param|-> <name> <group> <logical> <dim> | <consts...> | <row>:<var>[<idx>]:<coef> ...

Floats carry 17 significant digits, so a dump/parse round trip is exact.
"""
from __future__ import annotations

import re

import numpy as np

from .program import Affine, ConicProgram, Constraint, ProgramError, Variable

_TERM = re.compile(r"^(\d+):(.+)\[(\d+)\]:(\S+)$")


def _f(x: float) -> str:
    return f"{x:.17g}"


def _check_token(s: str) -> str:
    if not s or any(ch.isspace() for ch in s) or "|" in s:
        raise ProgramError(f"name {s!r} cannot be written as a single token")
    return s


def _terms(expr: Affine, owners: np.ndarray, starts: dict[str, int]) -> str:
    e = expr.canonical()
    out = []
    for r, c, v in zip(e.rows, e.cols, e.vals):
        name = owners[c]
        out.append(f"{r}:{name}[{c - starts[name]}]:{_f(v)}")
    return " ".join(out)


def dump_program(program: ConicProgram) -> str:
    owners = np.empty(program.n, dtype=object)
    starts = {}
    lines = [f"PROGRAM {_check_token(program.name or '-')}"]
    for v in program.variables.values():
        owners[v.start:v.start + v.size] = v.name
        starts[v.name] = v.start
        scales = " ".join(_f(s) for s in v.scale)
        lines.append(f"VAR {_check_token(v.name)} {v.size} {v.role} {scales}")
    obj = program.objective
    lines.append(f"OBJ | {_f(obj.const[0])} | {_terms(obj, owners, starts)}".rstrip())
    for c in program.constraints:
        param = "-" if c.param is None else _f(c.param)
        head = " ".join([c.cone, param, _check_token(c.name or "-"), _check_token(c.group or "-"),
                         _check_token(c.logical or "-"), str(c.expr.m)])
        consts = " ".join(_f(x) for x in c.expr.const)
        lines.append(f"CON {head} | {consts} | {_terms(c.expr, owners, starts)}".rstrip())
    return "\n".join(lines) + "\n"


def _parse_expr(m: int, consts: str, terms: str, program: ConicProgram) -> Affine:
    const = np.array([float(x) for x in consts.split()]) if consts.strip() else np.zeros(m)
    rows, cols, vals = [], [], []
    for tok in terms.split():
        match = _TERM.match(tok)
        if not match:
            raise ProgramError(f"bad term {tok!r}")
        r, name, idx, coef = match.groups()
        var = program.variables[name]
        if int(idx) >= var.size:
            raise ProgramError(f"index out of range in {tok!r}")
        rows.append(int(r))
        cols.append(var.start + int(idx))
        vals.append(float(coef))
    return Affine(m, rows, cols, vals, const)


def parse_program(text: str) -> ConicProgram:
    program = ConicProgram()
    for line in text.splitlines():
        if not line.strip():
            continue
        kind, _, rest = line.partition(" ")
        if kind == "PROGRAM":
            program.name = "" if rest.strip() == "-" else rest.strip()
        elif kind == "VAR":
            name, size, role, *scales = rest.split()
            program.add_variable(name, int(size), np.array([float(s) for s in scales]), role)
        elif kind == "OBJ":
            _, consts, terms = rest.split("|")
            program.objective = _parse_expr(1, consts, terms, program).canonical()
        elif kind == "CON":
            head, consts, terms = rest.split("|")
            cone, param, name, group, logical, m = head.split()
            undash = lambda s: "" if s == "-" else s  # noqa: E731
            expr = _parse_expr(int(m), consts, terms, program)
            program.add(cone, expr, param=None if param == "-" else float(param), name=undash(name),
                        group=undash(group), logical=undash(logical))
        else:
            raise ProgramError(f"unknown record {kind!r}")
    return program


def programs_equal(a: ConicProgram, b: ConicProgram) -> bool:
    """Structural identity: variables, scales, objective and every constraint."""
    if list(a.variables) != list(b.variables) or a.name != b.name:
        return False
    for name, va in a.variables.items():
        vb: Variable = b.variables[name]
        if (va.start, va.size, va.role) != (vb.start, vb.size, vb.role) or not np.array_equal(va.scale, vb.scale):
            return False
    if not a.objective.same_as(b.objective) or len(a.constraints) != len(b.constraints):
        return False
    for ca, cb in zip(a.constraints, b.constraints):
        ca: Constraint
        if (ca.cone, ca.param, ca.name, ca.group, ca.logical) != (cb.cone, cb.param, cb.name, cb.group, cb.logical):
            return False
        if not ca.expr.same_as(cb.expr):
            return False
    return True
