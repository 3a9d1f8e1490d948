"""Equilibrium and incentive verification for solved plans.

:func:`verify_steady_state` checks the five steady-state conditions for
truthful, always-serving drivers.  :func:`driver_best_response` solves the
full deviation problem of one infinitesimal driver as a discounted MDP over
states ``(location, believed type, penalty paid)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .economy import Economy
from .errors import DimensionMismatch, EmptyType, NonConvergence
from .mechanisms import (
    CompensationSchedule,
    MarketPlan,
    PenaltySchedule,
    deviation_system,
    transition_matrix,
)

AUDIT_TOL = 1e-8
SERVE = -1


@dataclass
class AuditReport:
    residuals: dict
    pi: np.ndarray
    stationary_residuals: np.ndarray
    tol: float = AUDIT_TOL
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values())

    @property
    def pass_(self) -> bool:
        return self.passed

    def failures(self) -> list[str]:
        return [k for k, v in self.residuals.items() if v > self.tol]


@dataclass
class DeviationValue:
    true_type: int
    reported_type: int
    value_by_state: dict
    expected_value: float
    best_action_by_state: dict
    sweeps: int = 0
    bellman_residual: float = 0.0
    notes: list[str] = field(default_factory=list)


def action_name(a: int) -> str:
    return "Serve" if a == SERVE else f"RelocateTo({a})"


# ---------------------------------------------------------------------------
# steady state


def _check_dims(e: Economy, plan: MarketPlan, comp: CompensationSchedule | None = None) -> None:
    n = e.n
    shapes = {
        "f": (plan.f.shape, (n, n, n)),
        "y": (plan.y.shape, (n, n, n)),
        "x": (plan.x.shape, (n, n)),
        "p": (plan.p.shape, (n, n)),
    }
    if comp is not None:
        shapes["c"] = (comp.c.shape, (n, n))
    bad = [k for k, (got, want) in shapes.items() if got != want]
    if bad:
        raise DimensionMismatch(f"plan arrays {bad} do not match n={n}")


def lifetime_values(e: Economy, plan: MarketPlan, comp: CompensationSchedule) -> np.ndarray:
    """``pi[i, t]`` for truthful always-serving drivers; NaN off the support.

    Solved for ``pi - w`` so that large ``w`` with ``delta`` near one keeps
    full relative precision.
    """
    n, d, w = e.n, e.delta, e.w
    pi = np.full((n, n), np.nan)
    for t in range(n):
        T, supp = transition_matrix(plan, t)
        idx = np.flatnonzero(supp)
        if idx.size == 0:
            continue
        r = comp.c[idx, t] + e.idio * (idx == t) - e.W
        # mass leaking off the support (broken flow balance) is valued at w
        A = np.eye(idx.size) - d * T[np.ix_(idx, idx)]
        u = np.linalg.solve(A, r)
        pi[idx, t] = w + u
    return pi


def stationary_check(plan: MarketPlan, t: int) -> float:
    """``|| q T - q ||_inf`` for the normalised mass ``q`` of reported type ``t``."""
    x = plan.x[:, t]
    X = float(x.sum())
    if X <= plan.mass_tol():
        raise EmptyType(f"no drivers of reported type {t}")
    supp = plan.support(t)
    d = plan.dispatch[:, :, t]
    T = np.zeros_like(d)
    T[supp] = d[supp] / x[supp, None]
    q = x / X
    return float(np.abs(q @ T - q).max())


def verify_steady_state(e: Economy, plan: MarketPlan, comp: CompensationSchedule,
                        tol: float = AUDIT_TOL) -> AuditReport:
    _check_dims(e, plan, comp)
    n = e.n
    notes: list[str] = []
    pi = lifetime_values(e, plan, comp)

    c1 = 0.0
    c4 = 0.0
    for t in range(n):
        occ = plan.support(t)
        if not occ.any():
            continue
        best_next = np.max(pi[occ, t])
        for i in np.flatnonzero(occ):
            bonus = e.idio if i == t else 0.0
            c1 = max(c1, bonus + e.delta * best_next - pi[i, t])
            c4 = max(c4, abs(pi[i, t] - e.w))

    d = plan.dispatch
    inflow = d.sum(axis=0)
    outflow = d.sum(axis=1)
    c2 = float(max(np.abs(plan.x - inflow).max(), np.abs(plan.x - outflow).max()))
    c3 = float(np.abs(plan.total_flow - e.demand * (1.0 - plan.p)).max())
    neg = max(0.0, -float(min(plan.f.min(), plan.y.min(), plan.x.min())))
    excess = np.maximum(plan.type_mass() - np.asarray(e.supply, dtype=float), 0.0)
    c5 = max(neg, float(excess.max()))
    caps = e.supply_caps()
    for t in np.flatnonzero(e.unbounded):
        if plan.type_mass()[t] >= caps[t] - tol:
            notes.append(f"type {t}: unbounded-supply cap is tight")

    stat = np.zeros(n)
    for t in range(n):
        try:
            stat[t] = stationary_check(plan, t)
        except EmptyType:
            stat[t] = 0.0
            notes.append(f"type {t}: no drivers employed")
    residuals = {"C1": max(c1, 0.0), "C2": c2, "C3": c3, "C4": c4, "C5": c5,
                 "stationary": float(stat.max(initial=0.0))}
    return AuditReport(residuals, pi, stat, tol, notes)


# ---------------------------------------------------------------------------
# single-driver deviations


def lemma2_strategy_value(e: Economy, parm, k: int, b: int, penalty: float | None = None) -> float:
    """Value of serving everywhere except at ``b``, where the driver returns to ``k``.

    ``penalty`` defaults to the applied ``P[b]``.  Initial states are weighted
    by the type-``b`` mass distribution.
    """
    plan, _comp, pen = parm
    x = plan.x[:, b]
    X = float(x.sum())
    if X <= plan.mass_tol():
        return e.w
    P = float(pen.P[b]) if penalty is None else float(penalty)
    A, rhs, _ = deviation_system(e, plan, b, k, shifted=True)
    n = e.n
    A_pi = A[:n, :n]
    r = rhs[:n] - A[:n, n] * P
    u = np.linalg.solve(A_pi, r)
    return float(e.w + (x / X) @ u)


class _DeviationMDP:
    """Tabular MDP for one type-``k`` driver who reported ``b``."""

    def __init__(self, e: Economy, plan: MarketPlan, comp: CompensationSchedule,
                 P: np.ndarray, k: int):
        n = e.n
        self.n = n
        self.S = 2 * n * n
        self.A = n + 1  # action 0 = serve, 1 + j = relocate to j
        R = np.full((self.S, self.A), -np.inf)
        Pt = np.zeros((self.S, self.A, self.S))
        self.fallback = []
        chains = [transition_matrix(plan, t) for t in range(n)]
        for i in range(n):
            for t in range(n):
                T, supp = chains[t]
                for paid in (False, True):
                    s = self.state(i, t, paid)
                    bonus = e.idio if i == k else 0.0
                    R[s, 0] = comp.c[i, t] + bonus
                    if supp[i]:
                        for j in range(n):
                            Pt[s, 0, self.state(j, t, paid)] = T[i, j]
                    else:
                        # no dispatch plan here: the platform keeps the driver in place
                        Pt[s, 0, s] = 1.0
                        self.fallback.append((i, t))
                    for j in range(n):
                        charge = P[t] if (j != t and not paid) else 0.0
                        R[s, 1 + j] = bonus - charge
                        nt = j if j != t else t
                        Pt[s, 1 + j, self.state(j, nt, paid or j != t)] = 1.0
        self.R = R
        self.P = Pt

    def state(self, i: int, t: int, paid: bool) -> int:
        return (i * self.n + t) * 2 + int(paid)

    def decode(self, s: int) -> tuple:
        paid = bool(s % 2)
        it = s // 2
        return (it // self.n, it % self.n, paid)


def _evaluate(R: np.ndarray, P: np.ndarray, delta: float, policy: np.ndarray) -> np.ndarray:
    S = R.shape[0]
    rows = np.arange(S)
    Ppi = P[rows, policy]
    r = R[rows, policy]
    return np.linalg.solve(np.eye(S) - delta * Ppi, r)


def _greedy(Q: np.ndarray, current: np.ndarray, tie: float) -> np.ndarray:
    """Argmax that keeps the current action (then Serve) unless beaten by ``tie``."""
    best = Q.max(axis=1)
    rows = np.arange(Q.shape[0])
    keep = Q[rows, current] >= best - tie
    serve = Q[:, 0] >= best - tie
    out = np.where(keep, current, np.where(serve, 0, Q.argmax(axis=1)))
    return out


def driver_best_response(e: Economy, parm, true_type: int, reported_type: int, *,
                         penalties: PenaltySchedule | np.ndarray | None = None,
                         max_iter: int = 10_000_000) -> DeviationValue:
    """Optimal lifetime value of a type-``true_type`` driver who reported ``reported_type``.

    ``penalties`` overrides the schedule in ``parm`` (pass zeros to study the
    unpenalised mechanism).  Ties between actions resolve to Serve.
    """
    plan, comp, pen = parm
    k, b = true_type, reported_type
    n, d = e.n, e.delta
    xb = plan.x[:, b]
    X = float(xb.sum())
    if X <= plan.mass_tol():
        return DeviationValue(k, b, {}, e.w, {}, notes=["NoDispatchPlan: no drivers of the reported type"])
    if penalties is None:
        P = np.asarray(pen.P, dtype=float)
    elif isinstance(penalties, PenaltySchedule):
        P = np.asarray(penalties.P, dtype=float)
    else:
        P = np.asarray(penalties, dtype=float)

    mdp = _DeviationMDP(e, plan, comp, P, k)
    R, Pt = mdp.R, mdp.P
    scale = max(1.0, e.w)
    tie = 1e-10 * scale

    # policy iteration from always-serve, then value iteration as a certificate
    R_fin = np.where(np.isfinite(R), R, -1e300)
    policy = np.zeros(mdp.S, dtype=int)
    for _ in range(100):
        v = _evaluate(R, Pt, d, policy)
        Q = R_fin + d * (Pt @ v)
        new = _greedy(Q, policy, tie)
        if np.array_equal(new, policy):
            break
        policy = new
    v = np.ascontiguousarray(v, dtype=float)
    tol = max((1.0 - d) * 1e-9, 64 * np.finfo(float).eps * float(np.abs(v).max()))
    sweeps, change = kernels.bellman_sweeps(np.ascontiguousarray(R), np.ascontiguousarray(Pt),
                                            d, v, tol, max_iter)
    if change > tol:
        raise NonConvergence(f"value iteration stopped with change {change:.3g}")
    Q = R_fin + d * (Pt @ v)
    policy = _greedy(Q, policy, tie)

    values, actions = {}, {}
    for s in range(mdp.S):
        key = mdp.decode(s)
        values[key] = float(v[s])
        a = int(policy[s])
        actions[key] = "Serve" if a == 0 else f"RelocateTo({a - 1})"
    expected = float(sum(xb[i] / X * v[mdp.state(i, b, False)] for i in range(n)))
    notes = []
    if mdp.fallback:
        notes.append("fallback self-dispatch at unsupported states: "
                     + ", ".join(f"({i},{t})" for i, t in sorted(set(mdp.fallback))))
    return DeviationValue(k, b, values, expected, actions, sweeps, float(change), notes)
