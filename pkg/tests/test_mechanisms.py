from __future__ import annotations

import warnings

import numpy as np
import pytest

import suites
from parm import (
    FlowExceedsDemand,
    PenaltyUndefined,
    compute_penalties,
    make_economy,
    prices_from_flows,
    revenue,
    solve_first_best,
    solve_parm,
    solve_porm,
)
from parm.mechanisms import Mode, parm_compensation, flat_compensation, penalty_residual, supply_shares


def test_prices_from_flows():
    e = make_economy([750, 250], [[1, 0], [0, 1]], [1, 1])
    p = prices_from_flows(e, np.array([[0, 0], [0, 125]]))
    assert p[0, 0] == 1.0 and p[1, 1] == pytest.approx(0.5)
    assert p[0, 1] == 1.0  # no demand on this cell
    assert prices_from_flows(e, np.array([[750, 0], [0, 0]]))[0, 0] == 0.0
    with pytest.raises(FlowExceedsDemand):
        prices_from_flows(e, np.array([[800, 0], [0, 0]]))


def test_compensation_schedules(unbalanced):
    c = parm_compensation(unbalanced).c
    assert c[0, 0] == pytest.approx(unbalanced.W - unbalanced.idio)
    assert c[0, 1] == pytest.approx(unbalanced.W)
    assert np.all(flat_compensation(unbalanced).c == unbalanced.W)


def test_first_best_golden(unbalanced):
    plan = solve_first_best(unbalanced)
    assert plan.mode is Mode.FIRST_BEST
    np.testing.assert_allclose(plan.f[:, :, 0], [[3.256, 15.685], [15.685, 65.374]], atol=1e-3)
    assert plan.f[1, 1, 1] == pytest.approx(100.0, abs=1e-6)


def test_parm_golden(local_skewed, penalty_needed):
    plan, _, _ = solve_parm(local_skewed)
    assert plan.f[0, 0, 1] == pytest.approx(100, abs=1e-6)
    assert plan.f[1, 1, 1] == pytest.approx(50, abs=1e-6)
    assert plan.y[1, 1, 1] == pytest.approx(50, abs=1e-6)
    plan, _, _ = solve_parm(penalty_needed)
    np.testing.assert_allclose(plan.x, [[34, 0], [25, 5]], atol=1e-6)


def test_porm_golden(local_even, local_skewed):
    plan, comp = solve_porm(local_even)
    assert plan.mode is Mode.PORM
    np.testing.assert_allclose(np.diag(plan.total_flow), [100, 100], atol=1e-6)
    plan, _ = solve_porm(local_skewed)
    np.testing.assert_allclose(plan.x.sum(axis=1), [2000 / 11, 200 / 11], atol=1e-6)


def test_empty_market():
    e = make_economy([10, 10], [[0.5, 0.5], [0.5, 0.5]], [0, 0])
    plan = solve_first_best(e)
    assert plan.objective == 0.0 and not plan.f.any() and not plan.x.any()
    _, _, pen = solve_parm(e)
    assert pen.undefined == (0, 1) and not pen.P.any()
    with pytest.raises(PenaltyUndefined):
        solve_parm(e, strict=True)


def test_porm_matches_first_best_with_one_type_and_no_bonus():
    e = make_economy([300, 80], [[0.6, 0.4], [0.3, 0.7]], [0, 150], idio_frac=0.0)
    porm, _ = solve_porm(e)
    fb = solve_first_best(e)
    assert porm.objective == pytest.approx(fb.objective, rel=1e-9)


def test_supply_shares():
    e = make_economy([1, 1], [[1, 0], [0, 1]], [30, 10])
    np.testing.assert_allclose(supply_shares(e), [0.75, 0.25])
    e = make_economy([1, 1, 1], np.full((3, 3), 1 / 3), [np.inf, 5, np.inf])
    np.testing.assert_allclose(supply_shares(e), [0.5, 0, 0.5])


@pytest.mark.parametrize("name", list(suites.NAMED))
def test_objective_is_revenue_under_eq4_pay(name):
    e = suites.named(name)
    plan, comp, _ = suites.parm(e)
    assert revenue(plan, comp) == pytest.approx(plan.objective, abs=1e-8 * max(1, plan.objective))
    fb = suites.first_best(e)
    assert revenue(fb, parm_compensation(e)) == pytest.approx(fb.objective, abs=1e-8 * max(1, fb.objective))
    porm, flat = suites.porm(e)
    assert revenue(porm, flat) == pytest.approx(porm.objective, abs=1e-8 * max(1, porm.objective))


def test_penalties_on_penalty_needed_market(penalty_needed):
    plan, _, pen = suites.parm(penalty_needed)
    assert pen.P[0] == pytest.approx(5.482352941, abs=1e-8)
    assert pen.P[1] == 0.0
    assert pen.P[0] == max(pen.P_raw[:, 0].max(), 0.0)
    assert penalty_residual(penalty_needed, plan, pen) <= 1e-8
    assert pen.residual <= 1e-8


def test_nonpositive_raw_penalties_give_zero():
    for e in suites.random_suite(False)[:5]:
        _, _, pen = suites.parm(e)
        assert np.all(pen.P_raw <= 0)
        assert not pen.P.any()


def test_ill_conditioned_system_warns(penalty_needed):
    plan, _, _ = suites.parm(penalty_needed)
    import parm.mechanisms as mech

    old = mech.COND_WARN
    mech.COND_WARN = 1.0
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            compute_penalties(penalty_needed, plan)
    finally:
        mech.COND_WARN = old
    assert any("ill-conditioned" in str(w.message) for w in caught)


def test_symmetric_plans_are_two_cycles():
    e = make_economy([200, 200, 200], np.full((3, 3), 1 / 3), [50, 120, 10], idio_frac=0.5)
    plan, _, _ = solve_parm(e)
    assert np.abs(plan.f - plan.f.transpose(1, 0, 2)).max() <= 1e-9
    off = plan.y.copy()
    for i in range(3):
        off[i, i] = 0
    assert np.abs(off).max() == 0.0
    assert plan.objective == pytest.approx(solve_first_best(e).objective, rel=1e-6)
