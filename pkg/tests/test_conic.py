import json

import numpy as np
import pytest

from aerial_irs.conic import (
    Affine,
    ConicProgram,
    ProgramError,
    add_power_cone_norm,
    cone_residual,
    dump_program,
    parse_program,
    programs_equal,
    solve,
    verify_solution,
    vstack,
)

from golden_cases import GOLDEN_DIR, golden_programs


def _lp():
    prog = ConicProgram("lp")
    x = prog.add_variable("x", 1)
    prog.add("nonneg", 3.0 - x, name="cap")
    prog.maximize(x)
    return prog


def test_lp_known_optimum():
    prog = _lp()
    res = solve(prog)
    assert res.optimal
    assert res.objective == pytest.approx(3.0, abs=1e-7)
    assert verify_solution(prog, res).max_residual <= 1e-9


def test_lp_with_scs():
    res = solve(_lp(), backend="scs", tol=1e-9, max_iter=10000)
    assert res.optimal and res.objective == pytest.approx(3.0, abs=1e-6)


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve(_lp(), backend="nope")


def test_infeasible_program():
    prog = ConicProgram("bad")
    x = prog.add_variable("x", 1)
    prog.add("nonneg", x - 2.0)
    prog.add("nonneg", 1.0 - x)
    prog.maximize(x)
    assert solve(prog).status == "infeasible"


def _norm_program(d, a_bar, rho):
    prog = ConicProgram("norm")
    y = prog.add_variable("y", 1)
    add_power_cone_norm(prog, Affine.constant(d), a_bar, Affine.constant([rho]), name="dist", group="dist")
    prog.add("nonneg", 1.0 - y)
    prog.maximize(y)
    return prog


def test_power_cone_norm_boundary():
    d = np.array([0.0, 0.0, 25.0])
    assert solve(_norm_program(d, 5.0, 25.0**5)).optimal
    assert solve(_norm_program(d, 5.0, 25.0**5 - 1)).status == "infeasible"


def test_power_cone_norm_classification():
    rng = np.random.default_rng(3)
    for _ in range(40):
        d = rng.normal(size=3)
        a_bar = rng.choice([1.0, 2.0, 5.0, 5.2])
        n = np.linalg.norm(d) ** a_bar
        feasible = rng.random() < 0.5
        rho = n * (1 + 1e-6) if feasible else n * (1 - 1e-6)
        res = solve(_norm_program(d, a_bar, rho), tol=1e-7)
        assert (res.status == "optimal") == feasible


def test_power_cone_norm_rejects_small_exponent():
    prog = ConicProgram()
    prog.add_variable("y", 1)
    with pytest.raises(ProgramError):
        add_power_cone_norm(prog, Affine.constant([1.0, 2.0]), 0.5, Affine.constant([3.0]))


def test_rsoc_known_point_and_corruption():
    prog = ConicProgram("rsoc")
    x = prog.add_variable("x", 2)
    y = prog.add_variable("y", 1)
    t = prog.add_variable("t", 1)
    # |x|^2 / y <= t
    prog.add("rsoc", vstack(y, t, x), name="qol")
    prog.maximize(-t)
    point = np.array([1.5, -2.0, 2.0, 6.25 / 2.0])
    assert verify_solution(prog, point).max_residual <= 1e-8
    corrupt = point.copy()
    corrupt[3] *= 0.9
    report = verify_solution(prog, corrupt)
    assert not report.ok and report.violations[0][0] == "qol"


@pytest.mark.parametrize("cone,e,param,inside", [
    ("zero", [0.0, 0.0], None, True),
    ("nonneg", [1.0, -1e-3], None, False),
    ("soc", [5.0, 3.0, 4.0], None, True),
    ("soc", [4.9, 3.0, 4.0], None, False),
    ("pow", [8.0, 1.0, 2.0], 1 / 3, True),
    ("pow", [8.0, 1.0, 2.1], 1 / 3, False),
    ("exp", [0.0, 1.0, 1.0], None, True),
    ("exp", [0.1, 1.0, 1.0], None, False),
])
def test_cone_residual(cone, e, param, inside):
    r = cone_residual(cone, np.array(e), param)
    assert (r <= 1e-12) == inside


def test_program_validation():
    prog = ConicProgram()
    x = prog.add_variable("x", 2)
    with pytest.raises(ProgramError):
        prog.add_variable("x", 1)
    with pytest.raises(ProgramError):
        prog.add("pow", x, param=0.5)
    with pytest.raises(ProgramError):
        prog.add("pow", vstack(x, Affine.constant([1.0])), param=1.5)
    with pytest.raises(ProgramError):
        prog.add("cube", x)
    with pytest.raises(ProgramError):
        prog.add("nonneg", Affine(1, [0], [7], [1.0], [0.0]))
    with pytest.raises(ProgramError):
        prog.add_variable("z", 1, scale=0.0)


def test_affine_algebra():
    prog = ConicProgram()
    x = prog.add_variable("x", 3)
    mat = np.arange(6.0).reshape(2, 3)
    e = mat @ (2.0 * x + 1.0) - x[[0, 1]]
    v = np.array([1.0, -2.0, 0.5])
    assert np.allclose(e.evaluate(v), mat @ (2 * v + 1) - v[:2])
    assert np.allclose((x.sum() / 2).evaluate(v), [v.sum() / 2])


@pytest.fixture(scope="module")
def goldens():
    return golden_programs()


@pytest.mark.parametrize("name", ["initializer", "beamforming", "phase"])
def test_golden_dump_matches_file(goldens, name):
    assert dump_program(goldens[name]) == (GOLDEN_DIR / f"{name}.txt").read_text()


@pytest.mark.parametrize("name", ["initializer", "beamforming", "phase"])
def test_dump_parse_round_trip(goldens, name):
    text = dump_program(goldens[name])
    back = parse_program(text)
    assert programs_equal(back, goldens[name])
    assert dump_program(back) == text


@pytest.mark.parametrize("name", ["initializer", "beamforming", "phase"])
def test_golden_objectives_reproducible(name):
    frozen = json.loads((GOLDEN_DIR / "objectives.json").read_text())[name]
    prog = parse_program((GOLDEN_DIR / f"{name}.txt").read_text())
    for _ in range(2):
        res = solve(prog)
        assert res.optimal
        assert abs(res.objective - frozen) <= 1e-6 * abs(frozen)
        assert verify_solution(prog, res).max_residual <= 1e-6


@pytest.mark.parametrize("name", ["initializer", "beamforming", "phase"])
def test_backends_agree(goldens, name):
    a = solve(goldens[name], "clarabel")
    b = solve(goldens[name], "scs", tol=1e-9, max_iter=100000)
    assert a.optimal and b.optimal
    assert abs(a.objective - b.objective) <= 1e-5 * abs(a.objective)
