"""Randomised invariants across the solver, mechanisms and audit."""

from __future__ import annotations

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from parm import (
    UNBOUNDED,
    build_market_program,
    driver_best_response,
    make_economy,
    maximize_concave_qp,
    revenue,
    solve_first_best,
    solve_parm,
    verify_steady_state,
)
from parm.mechanisms import parm_compensation, penalty_residual

SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def economies(draw, symmetric=False, unbounded=False):
    n = draw(st.integers(2, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    if symmetric:
        theta = np.full(n, rng.uniform(10, 500))
        alpha = np.full((n, n), 1.0 / n)
    else:
        theta = rng.uniform(0, 500, n)
        alpha = rng.dirichlet(np.ones(n), n)
    if unbounded:
        supply = [UNBOUNDED] * n
    else:
        supply = rng.uniform(0, 300, n)
    frac = draw(st.floats(0, 0.9))
    w = draw(st.sampled_from([40.0, 1000.0]))
    return make_economy(theta, alpha, supply, w=w, delta=0.99, idio_frac=frac)


@SETTINGS
@given(e=economies())
def test_plans_are_feasible_priced_and_audited(e):
    plan, comp, pen = solve_parm(e)
    qp = build_market_program(e, ic_constraint=True)
    z = qp.meta["layout"].pack(plan.f, plan.y, plan.x)
    assert max(qp.residuals(z).values()) <= 1e-8 * max(1.0, np.abs(z).max())
    assert np.all((plan.p >= 0) & (plan.p <= 1))
    rep = verify_steady_state(e, plan, comp)
    assert rep.passed, rep.failures()
    assert penalty_residual(e, plan, pen) <= 1e-8
    for b in range(e.n):
        assert np.all(plan.x[b, b] >= plan.x[:, b] - 1e-9 * max(1.0, plan.x.sum()))


@SETTINGS
@given(e=economies())
def test_relaxing_ic_never_hurts(e):
    fb = solve_first_best(e)
    plan, comp, _ = solve_parm(e)
    assert fb.objective >= plan.objective - 1e-8 * max(1.0, abs(fb.objective))
    assert abs(revenue(plan, comp) - plan.objective) <= 1e-8 * max(1.0, abs(plan.objective))
    assert abs(revenue(fb, parm_compensation(e)) - fb.objective) <= 1e-8 * max(1.0, abs(fb.objective))


@SETTINGS
@given(e=economies(symmetric=True))
def test_symmetric_economies_reach_first_best(e):
    fb = solve_first_best(e)
    plan, _, _ = solve_parm(e)
    assert abs(plan.objective - fb.objective) <= 1e-6 * max(1.0, abs(fb.objective))
    assert np.abs(plan.f - plan.f.transpose(1, 0, 2)).max() <= 1e-8 * max(1.0, plan.f.max())
    if e.idio == 0:
        return  # types are interchangeable, so any split of the home rides is optimal
    d = plan.dispatch
    for t in range(e.n):
        for i in range(e.n):
            assert d[i, i, t] <= d[t, t, t] + 1e-8


@SETTINGS
@given(e=economies(unbounded=True))
def test_unbounded_supply_reaches_first_best(e):
    fb = solve_first_best(e)
    parm = solve_parm(e)
    plan = parm[0]
    assert abs(plan.objective - fb.objective) <= 1e-6 * max(1.0, abs(fb.objective))
    assert np.all(plan.x.sum(axis=0) < e.supply_caps())


@settings(max_examples=15, deadline=None)
@given(e=economies())
def test_penalised_deviations_never_pay(e):
    parm = solve_parm(e)
    for b in range(e.n):
        for k in range(e.n):
            dv = driver_best_response(e, parm, k, b)
            assert dv.expected_value <= e.w + 1e-6 * max(1.0, e.w)


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(0.1, 10), seed=st.integers(0, 1000))
def test_solver_is_scale_consistent(scale, seed):
    # doubling every mass doubles the optimum and the plan
    rng = np.random.default_rng(seed)
    theta = rng.uniform(10, 300, 2)
    alpha = rng.dirichlet(np.ones(2), 2)
    supply = rng.uniform(5, 100, 2)
    a = make_economy(theta, alpha, supply, idio_frac=0.3)
    b = make_economy(theta * scale, alpha, supply * scale, idio_frac=0.3)
    qa = maximize_concave_qp(build_market_program(a, ic_constraint=True))
    qb = maximize_concave_qp(build_market_program(b, ic_constraint=True))
    assume(abs(qa.objective) > 1e-6)
    assert abs(qb.objective - scale * qa.objective) <= 1e-7 * max(1.0, abs(qb.objective))
