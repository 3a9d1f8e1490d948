"""Complete mechanism outcomes: first-best, PARM and PORM.

Every solver returns a :class:`MarketPlan` with flows indexed
``f[i, j, t]`` (origin, destination, reported type), relocations
``y[i, j, t]`` and masses ``x[i, t]``.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .economy import Economy, is_symmetric
from .errors import FlowExceedsDemand, PenaltyUndefined, SingularSystem
from .qp import QuadraticProgram, build_market_program, maximize_concave_qp

log = logging.getLogger(__name__)

FEAS_TOL = 1e-8
COND_WARN = 1e12


class Mode(str, enum.Enum):
    FIRST_BEST = "FirstBest"
    PARM = "PARM"
    PORM = "PORM"


@dataclass
class MarketPlan:
    f: np.ndarray
    y: np.ndarray
    x: np.ndarray
    p: np.ndarray
    objective: float
    mode: Mode
    gap: float = 0.0
    iterations: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def total_flow(self) -> np.ndarray:
        """Rides served on each cell, summed over types."""
        return self.f.sum(axis=2)

    @property
    def dispatch(self) -> np.ndarray:
        """``f + y``: all drivers leaving ``i`` for ``j`` by type."""
        return self.f + self.y

    def type_mass(self) -> np.ndarray:
        return self.x.sum(axis=0)

    def mass_tol(self) -> float:
        return 1e-9 * max(1.0, float(self.x.sum()))

    def support(self, t: int) -> np.ndarray:
        return self.x[:, t] > self.mass_tol()


@dataclass(frozen=True)
class CompensationSchedule:
    """Per-dispatch pay ``c[i, t]`` at origin ``i`` for reported type ``t``."""

    c: np.ndarray

    def pay(self, i: int, j: int, t: int) -> float:
        return float(self.c[i, t])


@dataclass
class PenaltySchedule:
    P: np.ndarray
    pi_dev: np.ndarray  # pi_dev[i, k, t]: value at i of a type-k driver reporting t
    P_raw: np.ndarray  # P_raw[k, t]
    residual: float = 0.0
    undefined: tuple = ()
    condition: np.ndarray | None = None

    @classmethod
    def zeros(cls, n: int, w: float) -> "PenaltySchedule":
        return cls(np.zeros(n), np.full((n, n, n), w), np.zeros((n, n)))


# ---------------------------------------------------------------------------


def prices_from_flows(e: Economy, total_flow: np.ndarray) -> np.ndarray:
    """Market-clearing prices; cells without demand are priced at 1."""
    F = np.asarray(total_flow, dtype=float)
    D = e.demand
    over = F - D
    if np.any(over > 1e-9 * np.maximum(1.0, D)):
        i, j = np.unravel_index(int(np.argmax(over)), over.shape)
        raise FlowExceedsDemand(f"flow {F[i, j]:.6g} exceeds demand {D[i, j]:.6g} on cell ({i}, {j})")
    p = np.ones_like(D)
    pos = D > 0
    p[pos] = 1.0 - F[pos] / D[pos]
    return np.clip(p, 0.0, 1.0)


def parm_compensation(e: Economy) -> CompensationSchedule:
    """Pay ``W`` per dispatch, less ``I`` at the driver's reported location."""
    c = np.full((e.n, e.n), e.W) - e.idio * np.eye(e.n)
    return CompensationSchedule(c)


def flat_compensation(e: Economy) -> CompensationSchedule:
    return CompensationSchedule(np.full((e.n, e.n), e.W))


def symmetrize_solution(qp: QuadraticProgram, z: np.ndarray, tol: float = 1e-8):
    """Two-cycle form of an optimum on symmetric demand.

    Replaces each type's trip flow by its symmetric part and drops relocations
    between distinct locations, recomputing masses from inflow.  Returns the
    new point, or ``None`` if it is infeasible or changes the objective.
    """
    ix = qp.meta["layout"]
    f, y, _ = ix.unpack(z)
    fs = 0.5 * (f + f.transpose(1, 0, 2))
    ys = np.zeros_like(y)
    idx = np.arange(ix.n)
    ys[idx, idx, :] = y[idx, idx, :]
    xs = fs.sum(axis=0) + ys.sum(axis=0)
    z2 = ix.pack(fs, ys, xs)
    scale = max(1.0, float(np.abs(z).max(initial=0.0)))
    if max(qp.residuals(z2).values()) > tol * scale:
        return None
    before, after = qp.objective(z), qp.objective(z2)
    if abs(after - before) > tol * max(1.0, abs(before)):
        return None
    return z2


def _solve_program(e: Economy, qp: QuadraticProgram, mode: Mode, tol: float | None, trace=None):
    sol = maximize_concave_qp(qp, tol, trace=trace)
    z = sol.z
    notes = []
    if qp.meta["preference_aware"] and is_symmetric(e):
        zs = symmetrize_solution(qp, z)
        if zs is None:
            notes.append("symmetrization rejected; solver optimum kept")
        else:
            z = zs
    f, y, x = qp.meta["layout"].unpack(z)
    f, y, x = f.copy(), y.copy(), x.copy()
    p = prices_from_flows(e, f.sum(axis=2))
    return MarketPlan(f, y, x, p, qp.objective(z), mode, sol.gap, sol.iterations, notes)


def solve_first_best(e: Economy, tol: float | None = None, *, trace=None) -> MarketPlan:
    """Revenue optimum with known driver types (no incentive constraint)."""
    qp = build_market_program(e, ic_constraint=False)
    return _solve_program(e, qp, Mode.FIRST_BEST, tol, trace)


def solve_parm(e: Economy, tol: float | None = None, *, strict: bool = False, trace=None):
    """PARM outcome: plan under the plurality constraint, pay and penalties."""
    qp = build_market_program(e, ic_constraint=True)
    plan = _solve_program(e, qp, Mode.PARM, tol, trace)
    comp = parm_compensation(e)
    pen = compute_penalties(e, plan, strict=strict)
    return plan, comp, pen


def solve_porm(e: Economy, tol: float | None = None, *, trace=None):
    """Type-blind plan, re-expanded to types in proportion to supply."""
    qp = build_market_program(e, ic_constraint=False, preference_aware=False)
    pooled = _solve_program(e, qp, Mode.PORM, tol, trace)
    share = supply_shares(e)
    f = pooled.f[:, :, :1] * share
    y = pooled.y[:, :, :1] * share
    x = pooled.x[:, :1] * share
    plan = MarketPlan(f, y, x, pooled.p, pooled.objective, Mode.PORM,
                      pooled.gap, pooled.iterations, pooled.notes)
    return plan, flat_compensation(e)


def supply_shares(e: Economy) -> np.ndarray:
    """Fraction of pooled supply attributed to each type.

    Unbounded types share equally; with no supply at all, types share equally.
    """
    s = np.asarray(e.supply, dtype=float)
    inf = np.isinf(s)
    if inf.any():
        share = inf / inf.sum()
    elif s.sum() > 0:
        share = s / s.sum()
    else:
        share = np.full(e.n, 1.0 / e.n)
    return share.astype(float)


# ---------------------------------------------------------------------------
# penalties


def transition_matrix(plan: MarketPlan, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Dispatch probabilities of reported type ``t`` and its support mask.

    Rows are normalised by total outflow, which equals ``x[i, t]`` on any
    flow-balanced plan.  Rows off the support are zero.
    """
    d = plan.dispatch[:, :, t]
    out = d.sum(axis=1)
    supp = plan.support(t) & (out > 0)
    T = np.zeros_like(d)
    T[supp] = d[supp] / out[supp, None]
    return T, supp


def deviation_system(e: Economy, plan: MarketPlan, t: int, k: int, *, shifted: bool = False):
    """Linear system for a type-``k`` driver who reported ``t``.

    She serves everywhere except at ``t``, where she relocates to ``k`` and
    is treated as type ``k`` from then on.  Unknowns are ``pi_0..pi_{n-1}``
    and the penalty ``P`` that makes her expected value exactly ``w``.
    Unreachable states are pinned to the value of relocating at once.

    With ``shifted`` the unknowns are ``pi - w``; the solution is the same
    but keeps full precision when ``w`` is large and ``delta`` close to one.
    Returns ``(A, b, fixed)``.
    """
    n, W, I, w, d = e.n, e.W, e.idio, e.w, e.delta
    T, supp = transition_matrix(plan, t)
    xt = plan.x[:, t]
    X = xt.sum()
    A = np.zeros((n + 1, n + 1))
    b = np.zeros(n + 1)
    fixed = np.zeros(n, dtype=bool)
    for i in range(n):
        A[i, i] = 1.0
        bonus = I if i == k else 0.0
        if i == t:
            A[i, n] = 1.0
            b[i] = bonus - W if shifted else d * w + bonus
        elif supp[i]:
            A[i, :n] -= d * T[i]
            b[i] = bonus if shifted else W + bonus
        else:
            fixed[i] = True
            b[i] = bonus - W if shifted else d * w + bonus
    A[n, :n] = xt / X
    b[n] = 0.0 if shifted else w
    return A, b, fixed


def compute_penalties(e: Economy, plan: MarketPlan, *, strict: bool = False) -> PenaltySchedule:
    """Solve the penalty system for every (true, reported) type pair.

    ``P[t] = max(max_k P_raw[k, t], 0)``.  Types with no employed drivers get
    ``P = 0`` and are listed in ``undefined`` (or raise with ``strict``).
    """
    n = e.n
    pi = np.full((n, n, n), np.nan)
    P_raw = np.full((n, n), np.nan)
    P = np.zeros(n)
    cond = np.full((n, n), np.nan)
    undefined = []
    worst = 0.0
    tol = plan.mass_tol()
    for t in range(n):
        if plan.x[:, t].sum() <= tol:
            if strict:
                raise PenaltyUndefined(t)
            undefined.append(t)
            continue
        for k in range(n):
            A, b, _ = deviation_system(e, plan, t, k, shifted=True)
            c = np.linalg.cond(A)
            cond[k, t] = c
            if not np.isfinite(c):
                raise SingularSystem(t, c)
            if c > COND_WARN:
                warnings.warn(f"penalty system for type {t} is ill-conditioned ({c:.3g})",
                              RuntimeWarning, stacklevel=2)
            try:
                sol = np.linalg.solve(A, b)
            except np.linalg.LinAlgError as exc:
                raise SingularSystem(t, c) from exc
            pi[:, k, t] = e.w + sol[:n]
            P_raw[k, t] = sol[n]
            A0, b0, _ = deviation_system(e, plan, t, k)
            full = np.concatenate([pi[:, k, t], [P_raw[k, t]]])
            worst = max(worst, float(np.abs(A0 @ full - b0).max()))
        P[t] = max(float(np.max(P_raw[:, t])), 0.0)
    return PenaltySchedule(P, pi, P_raw, worst, tuple(undefined), cond)


def penalty_residual(e: Economy, plan: MarketPlan, pen: PenaltySchedule) -> float:
    """Worst residual of the penalty system with ``(pi_dev, P_raw)`` substituted."""
    worst = 0.0
    for t in range(e.n):
        if t in pen.undefined:
            continue
        for k in range(e.n):
            A, b, _ = deviation_system(e, plan, t, k)
            sol = np.concatenate([pen.pi_dev[:, k, t], [pen.P_raw[k, t]]])
            worst = max(worst, float(np.abs(A @ sol - b).max()))
    return worst
