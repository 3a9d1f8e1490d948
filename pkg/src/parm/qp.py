"""Concave quadratic programs over flow polytopes.

A :class:`QuadraticProgram` maximises::

    c.z + sum_t kappa[t] * (agg[t] . z)**2      (kappa <= 0)

over ``A_eq z = b_eq, A_ub z <= b_ub, z >= 0``.  The market program has one
quadratic term per demand cell: with Uniform[0, 1] rider values and price
eliminated through market clearing, the revenue on cell ``(i, j)`` is
``F - F**2 / D`` where ``F`` is the total flow and ``D = theta_i alpha_ij``.

:func:`maximize_concave_qp` runs away-step Frank-Wolfe with exact line
search, using the warm-started simplex as the linear oracle, then tries to
land exactly on the optimal face (see :func:`_polish`).
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .economy import Economy
from .errors import IterationLimit, ParmError
from .lp import LinearProgram, SimplexSolver, solve_lp

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
MAX_ITER = 100_000
SECOND_ROUND = 3  # candidates re-polished when the first round misses
POLISH_FIRST = 20


def default_tol() -> float:
    """Relative gap tolerance; ``PARM_SOLVER_TOL`` overrides the default."""
    raw = os.environ.get("PARM_SOLVER_TOL")
    return float(raw) if raw else DEFAULT_TOL


@dataclass
class QuadraticProgram:
    names: list[str]
    c: np.ndarray
    agg: np.ndarray
    kappa: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if np.any(self.kappa > 0):
            raise ValueError("quadratic part must be concave (kappa <= 0)")

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.meta["index"][name]

    def objective(self, z: np.ndarray) -> float:
        F = self.agg @ z
        return float(self.c @ z + self.kappa @ (F * F))

    def gradient(self, z: np.ndarray) -> np.ndarray:
        F = self.agg @ z
        return self.c + 2.0 * (self.agg.T @ (self.kappa * F))

    def feasible_region(self) -> LinearProgram:
        return LinearProgram(np.zeros(self.n_vars), self.A_eq, self.b_eq, self.A_ub, self.b_ub)

    def residuals(self, z: np.ndarray) -> dict:
        return self.feasible_region().residuals(z)


@dataclass
class QPSolution:
    z: np.ndarray
    objective: float
    gap: float
    iterations: int
    polished: bool = False
    converged: bool = True


# ---------------------------------------------------------------------------
# the market program


@dataclass(frozen=True)
class MarketIndex:
    """Variable layout ``f[i, j, t]``, ``y[i, j, t]``, ``x[i, t]``."""

    n: int
    n_types: int

    @property
    def size(self) -> int:
        n, k = self.n, self.n_types
        return 2 * n * n * k + n * k

    def f(self, i: int, j: int, t: int) -> int:
        return (i * self.n + j) * self.n_types + t

    def y(self, i: int, j: int, t: int) -> int:
        return self.n * self.n * self.n_types + self.f(i, j, t)

    def x(self, i: int, t: int) -> int:
        return 2 * self.n * self.n * self.n_types + i * self.n_types + t

    def unpack(self, z: np.ndarray):
        n, k = self.n, self.n_types
        nn = n * n * k
        f = z[:nn].reshape(n, n, k)
        y = z[nn: 2 * nn].reshape(n, n, k)
        x = z[2 * nn:].reshape(n, k)
        return f, y, x

    def pack(self, f, y, x) -> np.ndarray:
        return np.concatenate([np.ravel(f), np.ravel(y), np.ravel(x)])


def build_market_program(e: Economy, *, ic_constraint: bool = False,
                         preference_aware: bool = True) -> QuadraticProgram:
    """Encode the revenue program for ``e``.

    With ``preference_aware=False`` all supply is pooled into one type and the
    idiosyncratic utility is dropped from the objective.  ``ic_constraint``
    adds ``x[t, t] >= x[i, t]`` for every ``i, t`` (``n*n`` rows, of which the
    ``i == t`` ones are vacuous).
    """
    n = e.n
    D = e.demand
    caps = e.supply_caps()
    if preference_aware:
        k = n
        type_caps = caps
        idio = e.idio
    else:
        k = 1
        type_caps = np.array([float(np.sum(caps))])
        idio = 0.0
    ix = MarketIndex(n, k)
    N = ix.size
    names: list[str] = [""] * N
    for i in range(n):
        for j in range(n):
            for t in range(k):
                names[ix.f(i, j, t)] = f"f[{i}][{j}][{t}]"
                names[ix.y(i, j, t)] = f"y[{i}][{j}][{t}]"
    for i in range(n):
        for t in range(k):
            names[ix.x(i, t)] = f"x[{i}][{t}]"

    W = e.W
    c = np.zeros(N)
    agg_rows, kappa = [], []
    cells = []
    for i in range(n):
        for j in range(n):
            if D[i, j] > 0:
                row = np.zeros(N)
                for t in range(k):
                    row[ix.f(i, j, t)] = 1.0
                    c[ix.f(i, j, t)] = 1.0
                agg_rows.append(row)
                kappa.append(-1.0 / D[i, j])
                cells.append((i, j))
    for i in range(n):
        for t in range(k):
            c[ix.x(i, t)] = -W + (idio if (preference_aware and i == t) else 0.0)

    eq_rows, eq_rhs = [], []
    # inflow balance: x_i = sum_j f_ji + y_ji
    for i in range(n):
        for t in range(k):
            row = np.zeros(N)
            row[ix.x(i, t)] = 1.0
            for j in range(n):
                row[ix.f(j, i, t)] -= 1.0
                row[ix.y(j, i, t)] -= 1.0
            eq_rows.append(row)
            eq_rhs.append(0.0)
    # relocation identity: sum_j y_ij = x_i - sum_j f_ij
    for i in range(n):
        for t in range(k):
            row = np.zeros(N)
            row[ix.x(i, t)] = -1.0
            for j in range(n):
                row[ix.f(i, j, t)] += 1.0
                row[ix.y(i, j, t)] += 1.0
            eq_rows.append(row)
            eq_rhs.append(0.0)

    ub_rows, ub_rhs, ub_kind = [], [], []
    # market clearing with p in [0, 1]: total flow never exceeds demand
    for i in range(n):
        for j in range(n):
            row = np.zeros(N)
            for t in range(k):
                row[ix.f(i, j, t)] = 1.0
            ub_rows.append(row)
            ub_rhs.append(float(D[i, j]))
            ub_kind.append(("demand", i, j))
    for t in range(k):
        row = np.zeros(N)
        for i in range(n):
            row[ix.x(i, t)] = 1.0
        ub_rows.append(row)
        ub_rhs.append(float(type_caps[t]))
        ub_kind.append(("supply", t))
    n_ic = 0
    if ic_constraint and preference_aware:
        for t in range(k):
            for i in range(n):
                row = np.zeros(N)
                if i != t:
                    row[ix.x(i, t)] = 1.0
                    row[ix.x(t, t)] = -1.0
                ub_rows.append(row)
                ub_rhs.append(0.0)
                ub_kind.append(("ic", i, t))
                n_ic += 1

    agg = np.array(agg_rows) if agg_rows else np.zeros((0, N))
    return QuadraticProgram(
        names=names,
        c=c,
        agg=agg,
        kappa=np.array(kappa, dtype=float),
        A_eq=np.array(eq_rows),
        b_eq=np.array(eq_rhs),
        A_ub=np.array(ub_rows),
        b_ub=np.array(ub_rhs),
        meta={
            "layout": ix,
            "index": {name: idx for idx, name in enumerate(names)},
            "cells": cells,
            "ub_kind": ub_kind,
            "n_ic": n_ic,
            "n_ic_nonvacuous": n_ic - (k if n_ic else 0),
            "preference_aware": preference_aware,
            "ic_constraint": bool(ic_constraint and preference_aware),
            "type_caps": type_caps,
        },
    )


# ---------------------------------------------------------------------------
# Frank-Wolfe with away steps


def _line_search(qp: QuadraticProgram, g: np.ndarray, d: np.ndarray, gmax: float) -> float:
    slope = float(g @ d)
    if slope <= 0.0:
        return 0.0
    Ad = qp.agg @ d
    curv = float(qp.kappa @ (Ad * Ad))
    if curv >= 0.0:
        return gmax
    return min(gmax, -slope / (2.0 * curv))


def _vertex_key(v: np.ndarray) -> bytes:
    return np.round(v, 10).tobytes()


def maximize_concave_qp(qp: QuadraticProgram, tol: float | None = None, *,
                        max_iter: int = MAX_ITER, polish: bool = True,
                        trace: TextIO | None = None) -> QPSolution:
    """Maximise ``qp`` to a Frank-Wolfe gap ``<= tol * max(1, |objective|)``.

    Deterministic for identical inputs.  When ``trace`` is given, one line
    ``iteration objective gap`` is written per iterate.  Raises
    :class:`IterationLimit` (carrying the best iterate) if the cap is hit.
    """
    tol = default_tol() if tol is None else tol
    oracle = SimplexSolver(qp.feasible_region())

    z = oracle.maximize(qp.gradient(np.zeros(qp.n_vars))).x
    active: dict[bytes, list] = {_vertex_key(z): [z, 1.0]}
    gap = np.inf
    obj = qp.objective(z)
    next_polish = POLISH_FIRST
    it = 0
    for it in range(1, max_iter + 1):
        g = qp.gradient(z)
        s = oracle.maximize(g).x
        gap = max(0.0, float(g @ (s - z)))
        obj = qp.objective(z)
        if trace is not None:
            trace.write(f"{it} {obj:.15g} {gap:.6e}\n")
        if gap <= tol * max(1.0, abs(obj)):
            break
        if polish and it >= next_polish:
            # an exact face solve often finishes long before Frank-Wolfe would
            next_polish *= 2
            cand = _polish(qp, QPSolution(z, obj, gap, it), oracle)
            if cand.polished and cand.gap <= tol * max(1.0, abs(cand.objective)):
                if trace is not None:
                    trace.write(f"{it} {cand.objective:.15g} {cand.gap:.6e}\n")
                return cand

        keys = list(active)
        scores = [float(g @ active[k][0]) for k in keys]
        a_key = keys[int(np.argmin(scores))]
        a_vec, a_w = active[a_key]
        away_gap = float(g @ (z - a_vec))
        if gap >= away_gap or len(active) == 1:
            d = s - z
            gamma = _line_search(qp, g, d, 1.0)
            for item in active.values():
                item[1] *= 1.0 - gamma
            key = _vertex_key(s)
            if gamma >= 1.0:
                active = {key: [s, 1.0]}
            elif key in active:
                active[key][1] += gamma
            else:
                active[key] = [s, gamma]
        else:
            d = z - a_vec
            gmax = a_w / (1.0 - a_w)
            gamma = _line_search(qp, g, d, gmax)
            for item in active.values():
                item[1] *= 1.0 + gamma
            active[a_key][1] -= gamma
            if gamma >= gmax:
                del active[a_key]
        active = {k: v for k, v in active.items() if v[1] > 0.0}
        total = sum(v[1] for v in active.values())
        z = sum(v[1] * v[0] for v in active.values()) / total
    else:
        best = QPSolution(z, qp.objective(z), gap, it, converged=False)
        raise IterationLimit(f"Frank-Wolfe stopped at gap {gap:.3g}", best=best)

    sol = QPSolution(z, obj, gap, it)
    if polish:
        sol = _polish(qp, sol, oracle)
    return sol


def _faces(qp: QuadraticProgram, z0: np.ndarray, oracle: SimplexSolver):
    """Guesses of the optimal face near ``z0`` as ``(support, tight rows)``.

    Supports come from the LP multipliers at the current gradient (a clearly
    positive bound multiplier puts a variable off the face) and from the
    entries of ``z0``; tight rows come from the row multipliers and from the
    slacks at ``z0``.  Every pairing is tried, most plausible first.
    """
    g = qp.gradient(z0)
    gscale = max(1.0, float(np.abs(g).max(initial=0.0)))
    scale = max(1.0, float(np.abs(z0).max(initial=0.0)))
    slack0 = qp.b_ub - qp.A_ub @ z0
    ladder = (1e-9, 1e-7, 1e-5, 1e-3, 1e-2)
    supports, tights = [], []
    # on a degenerate LP the multipliers depend on the basis reached, so ask
    # both the warm-started oracle and a cold one
    for solver in (oracle, SimplexSolver(qp.feasible_region())):
        solver.maximize(g)
        mu, lam = solver.reduced_costs()
        for thr in ladder:
            supports.append(np.flatnonzero(mu <= thr * gscale))
            tights.append(np.flatnonzero(lam > thr * gscale))
    for thr in ladder:
        supports.append(np.flatnonzero(z0 > thr * scale))
        tights.append(np.flatnonzero(slack0 <= thr * scale))
    supports = _unique(supports)
    tights = _unique(tights)
    for supp in supports:
        for tight in tights:
            yield supp, tight


def _unique(arrays: list) -> list:
    seen, out = set(), []
    for a in arrays:
        key = a.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(a)
    return out


def _face_candidates(qp: QuadraticProgram, z0: np.ndarray, oracle: SimplexSolver):
    """Exact optima of the faces suggested by ``z0``, one per threshold.

    On a face (variables near zero fixed at zero, nearly tight inequalities
    made equalities) the optimality conditions are a linear system.  The
    Hessian is singular, so the least-squares solution may leave the
    polytope or split flows poorly; but every optimum shares its aggregate
    cell flows, so the flows are fixed and an LP recovers a feasible vertex
    with the best linear part.
    """
    scale = max(1.0, float(np.abs(z0).max(initial=0.0)))
    G = -2.0 * (qp.agg.T * qp.kappa) @ qp.agg  # negated Hessian, PSD
    seen = set()
    for supp, tight in list(_faces(qp, z0, oracle)):
        key = (supp.tobytes(), tight.tobytes())
        if supp.size == 0 or key in seen:
            continue
        seen.add(key)
        A = np.vstack([qp.A_eq[:, supp], qp.A_ub[tight][:, supp]])
        b = np.concatenate([qp.b_eq, qp.b_ub[tight]])
        m = A.shape[0]
        K = np.block([[G[np.ix_(supp, supp)], A.T], [A, np.zeros((m, m))]])
        rhs = np.concatenate([qp.c[supp], b])
        solk, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        if np.abs(K @ solk - rhs).max(initial=0.0) > 1e-9 * max(1.0, np.abs(rhs).max()):
            continue
        z = np.zeros(qp.n_vars)
        z[supp] = solk[: supp.size]
        if z.min(initial=0.0) >= -1e-12 * scale:
            z = np.maximum(z, 0.0)
            if max(qp.residuals(z).values()) <= 1e-9 * scale:
                yield z
        # a least-squares face point can still split flows badly across types
        F = qp.agg @ z
        lp = LinearProgram(qp.c, np.vstack([qp.A_eq, qp.agg]), np.concatenate([qp.b_eq, F]),
                           qp.A_ub, qp.b_ub)
        try:
            z = solve_lp(lp).x
        except ParmError:
            continue
        z[z <= 1e-13 * scale] = 0.0  # tableau round-off
        yield z


def _polish(qp: QuadraticProgram, sol: QPSolution, oracle: SimplexSolver) -> QPSolution:
    """Best certified face optimum near ``sol``; never worse than ``sol``.

    A candidate is kept only if it is feasible, its objective is no lower and
    its Frank-Wolfe gap (checked with the LP oracle) is no larger.  When the
    faces guessed from ``sol`` all miss, the best few candidates seed a second
    round: their supports are exact even when their flows are slightly off,
    which happens when the objective barely separates faces.
    """
    best = sol
    scale = max(1.0, float(np.abs(sol.z).max(initial=0.0)))
    seeds = []
    for rnd in range(2):
        starts = [sol.z] if rnd == 0 else [z for _, z in sorted(seeds, key=lambda t: -t[0])[:SECOND_ROUND]]
        for z0 in starts:
            for z in _face_candidates(qp, z0, oracle):
                if max(qp.residuals(z).values()) > 1e-9 * scale:
                    continue
                g = qp.gradient(z)
                s = oracle.maximize(g).x
                gap = max(0.0, float(g @ (s - z)))
                obj = qp.objective(z)
                if rnd == 0:
                    seeds.append((obj, z))
                if gap <= best.gap and obj >= best.objective - 1e-12 * max(1.0, abs(best.objective)):
                    best = QPSolution(z, obj, gap, sol.iterations, polished=True)
                    if gap <= 1e-12 * max(1.0, abs(obj)):
                        return best
    return best
