"""Conic program IR and the backend adapters."""
from .backends import BACKENDS, solve
from .program import (
    CONES,
    Affine,
    ConicProgram,
    Constraint,
    ProgramError,
    ResidualReport,
    SolveResult,
    Variable,
    add_power_cone_norm,
    cone_residual,
    verify_solution,
    vstack,
)
from .textio import dump_program, parse_program, programs_equal

__all__ = [
    "BACKENDS", "CONES", "Affine", "ConicProgram", "Constraint", "ProgramError", "ResidualReport",
    "SolveResult", "Variable", "add_power_cone_norm", "cone_residual", "dump_program", "parse_program",
    "programs_equal", "solve", "verify_solution", "vstack",
]
