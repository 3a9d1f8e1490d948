from __future__ import annotations

import io

import numpy as np
import pytest

import suites
from parm import IterationLimit, QuadraticProgram, build_market_program, maximize_concave_qp, solve_lp
from parm.lp import LinearProgram
from parm.qp import default_tol


def one_dimensional(lo=0.0, hi=3.0, centre=1.0):
    # -(x - c)^2 = -x^2 + 2cx - c^2; the constant is dropped
    return QuadraticProgram(names=["x"], c=np.array([2.0 * centre]), agg=np.array([[1.0]]),
                            kappa=np.array([-1.0]), A_eq=np.zeros((0, 1)), b_eq=np.zeros(0),
                            A_ub=np.array([[1.0]]), b_ub=np.array([hi]))


def test_interior_optimum():
    sol = maximize_concave_qp(one_dimensional())
    assert sol.z[0] == pytest.approx(1.0, abs=1e-7)
    assert sol.gap <= 1e-8 * max(1.0, abs(sol.objective))


def test_boundary_optimum():
    sol = maximize_concave_qp(one_dimensional(hi=0.5))
    assert sol.z[0] == pytest.approx(0.5, abs=1e-12)


def test_convex_objective_rejected():
    with pytest.raises(ValueError):
        QuadraticProgram(["x"], np.zeros(1), np.ones((1, 1)), np.ones(1), np.zeros((0, 1)),
                         np.zeros(0), np.ones((1, 1)), np.ones(1))


def test_variable_and_constraint_counts(local_even):
    qp = build_market_program(local_even, ic_constraint=True)
    assert qp.n_vars == 20
    assert qp.meta["n_ic"] == 4 and qp.meta["n_ic_nonvacuous"] == 2
    plain = build_market_program(local_even)
    assert plain.A_ub.shape[0] == qp.A_ub.shape[0] - 4
    pooled = build_market_program(local_even, ic_constraint=True, preference_aware=False)
    assert pooled.n_vars == 10 and pooled.meta["n_ic"] == 0


def test_zero_demand_cell_has_no_quadratic_term(local_even):
    qp = build_market_program(local_even)
    assert (0, 1) not in qp.meta["cells"] and (1, 0) not in qp.meta["cells"]
    assert len(qp.kappa) == 2
    sol = maximize_concave_qp(qp)
    f, _, _ = qp.meta["layout"].unpack(sol.z)
    assert np.all(f[0, 1] == 0) and np.all(f[1, 0] == 0)


def test_pooled_program_serves_even_local_markets(local_even):
    sol = maximize_concave_qp(build_market_program(local_even, preference_aware=False))
    f, _, _ = build_market_program(local_even, preference_aware=False).meta["layout"].unpack(sol.z)
    assert f[0, 0, 0] == pytest.approx(100, abs=1e-6)
    assert f[1, 1, 0] == pytest.approx(100, abs=1e-6)


def test_idio_only_counts_when_preference_aware(unbalanced):
    aware = build_market_program(unbalanced)
    blind = build_market_program(unbalanced, preference_aware=False)
    ix = aware.meta["layout"]
    assert aware.c[ix.x(1, 1)] - aware.c[ix.x(0, 1)] == pytest.approx(unbalanced.idio)
    assert np.all(blind.c[blind.meta["layout"].x(0, 0):] == -unbalanced.W)


def test_linearisation_at_optimum_is_a_supporting_vertex(local_even):
    qp = build_market_program(local_even, ic_constraint=True)
    sol = maximize_concave_qp(qp)
    g = qp.gradient(sol.z)
    lin = solve_lp(LinearProgram(g, qp.A_eq, qp.b_eq, qp.A_ub, qp.b_ub))
    assert lin.objective == pytest.approx(g @ sol.z, abs=1e-6)
    _, _, x = qp.meta["layout"].unpack(sol.z)
    np.testing.assert_allclose(x[:, 1], [80, 120], atol=1e-6)


def test_solutions_are_feasible_and_certified(unbalanced, penalty_needed):
    for e in (unbalanced, penalty_needed):
        for ic in (False, True):
            qp = build_market_program(e, ic_constraint=ic)
            sol = maximize_concave_qp(qp)
            assert max(qp.residuals(sol.z).values()) <= 1e-8
            assert sol.gap <= 1e-8 * max(1.0, abs(sol.objective))
            assert sol.objective == pytest.approx(qp.objective(sol.z), abs=1e-9)


def test_ic_never_raises_the_optimum():
    rng = np.random.default_rng(7)
    for _ in range(10):
        e = suites.oracle_economy(rng)
        free = maximize_concave_qp(build_market_program(e)).objective
        ic = maximize_concave_qp(build_market_program(e, ic_constraint=True)).objective
        assert free >= ic - 1e-8


def test_deterministic(unbalanced):
    qp = build_market_program(unbalanced, ic_constraint=True)
    a, b = maximize_concave_qp(qp), maximize_concave_qp(qp)
    assert np.array_equal(a.z, b.z) and a.iterations == b.iterations


def test_trace_lines(unbalanced):
    buf = io.StringIO()
    maximize_concave_qp(build_market_program(unbalanced), trace=buf, polish=False)
    lines = buf.getvalue().splitlines()
    assert lines
    it, obj, gap = lines[-1].split()
    assert int(it) >= 1 and float(gap) >= 0 and np.isfinite(float(obj))


def test_iteration_limit_returns_best_iterate(unbalanced):
    qp = build_market_program(unbalanced, ic_constraint=True)
    with pytest.raises(IterationLimit) as info:
        maximize_concave_qp(qp, tol=1e-15, max_iter=3, polish=False)
    best = info.value.best
    assert best is not None and best.gap > 0
    assert max(qp.residuals(best.z).values()) <= 1e-8


def test_tolerance_from_environment(monkeypatch):
    monkeypatch.setenv("PARM_SOLVER_TOL", "1e-5")
    assert default_tol() == 1e-5
    monkeypatch.delenv("PARM_SOLVER_TOL")
    assert default_tol() == 1e-8


def test_grid_search_agrees_on_lattice_optimum(local_even):
    from oracles import grid_maximum

    for ic in (False, True):
        sol = maximize_concave_qp(build_market_program(local_even, ic_constraint=ic))
        grid_val, grid_x = grid_maximum(local_even, ic=ic)
        assert abs(sol.objective - grid_val) <= 1e-3
    np.testing.assert_allclose(grid_x[:, 1], [80, 120])


def test_faces_separated_only_by_a_tiny_bonus():
    # the home bonus is far below the iterate's gradient error, so the exact
    # face has to be recovered from flows rather than multipliers
    from parm import make_economy

    e = make_economy([322.11122679] * 2, [[0.5, 0.5], [0.5, 0.5]], [80.93601413, 12.29205718],
                     idio=4.768371584e-08)
    for ic in (False, True):
        qp = build_market_program(e, ic_constraint=ic)
        sol = maximize_concave_qp(qp)
        assert sol.iterations < 100
        _, _, x = qp.meta["layout"].unpack(sol.z)
        assert x[0, 1] == 0.0  # type 1 stays home
