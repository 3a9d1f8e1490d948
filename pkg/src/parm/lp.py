"""Dense two-phase primal simplex with warm starts.

Programs have the form ``max c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,
x >= 0``.  :class:`SimplexSolver` runs phase one once and then re-optimises
for any number of objectives from the last optimal basis, which is what the
Frank-Wolfe loop needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import Infeasible, IterationLimit, Unbounded


@dataclass
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        nv = self.c.size
        if self.A_eq is None:
            self.A_eq, self.b_eq = np.zeros((0, nv)), np.zeros(0)
        if self.A_ub is None:
            self.A_ub, self.b_ub = np.zeros((0, nv)), np.zeros(0)
        self.A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float)).reshape(-1, nv)
        self.A_ub = np.atleast_2d(np.asarray(self.A_ub, dtype=float)).reshape(-1, nv)
        self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        self.b_ub = np.asarray(self.b_ub, dtype=float).ravel()
        if self.b_eq.size != self.A_eq.shape[0] or self.b_ub.size != self.A_ub.shape[0]:
            raise ValueError("constraint matrix and right-hand side sizes differ")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def residuals(self, x: np.ndarray) -> dict:
        """Worst violation of each constraint family at ``x``."""
        eq = np.abs(self.A_eq @ x - self.b_eq).max(initial=0.0)
        ub = np.maximum(self.A_ub @ x - self.b_ub, 0.0).max(initial=0.0)
        lb = np.maximum(-x, 0.0).max(initial=0.0)
        return {"eq": float(eq), "ub": float(ub), "lb": float(lb)}


@dataclass
class LPSolution:
    x: np.ndarray
    objective: float
    basis: tuple
    pivots: int


class SimplexSolver:
    """Phase one at construction; :meth:`maximize` for each new objective."""

    REFACTOR_EVERY = 40

    def __init__(self, lp: LinearProgram, *, max_pivots: int | None = None,
                 bland_after: int = 50):
        self.lp = lp
        nv = lp.n_vars
        m_eq, m_ub = lp.A_eq.shape[0], lp.A_ub.shape[0]
        m = m_eq + m_ub
        self.n_vars = nv
        self.bland_after = bland_after

        A = np.zeros((m, nv + m_ub))
        A[:m_eq, :nv] = lp.A_eq
        A[m_eq:, :nv] = lp.A_ub
        A[m_eq:, nv:] = np.eye(m_ub)
        b = np.concatenate([lp.b_eq, lp.b_ub])
        neg = b < 0
        A[neg] *= -1.0
        b = np.where(neg, -b, b)

        # slack columns with +1 start basic; every other row gets an artificial
        basis = np.full(m, -1, dtype=np.int64)
        for r in range(m_eq, m):
            if not neg[r]:
                basis[r] = nv + (r - m_eq)
        art_rows = np.flatnonzero(basis < 0)
        n_std = nv + m_ub
        n_art = art_rows.size
        T = np.zeros((m + 1, n_std + n_art + 1))
        T[:m, :n_std] = A
        T[:m, -1] = b
        for k, r in enumerate(art_rows):
            T[r, n_std + k] = 1.0
            basis[r] = n_std + k
        self.scale_b = max(1.0, float(np.abs(b).max(initial=0.0)))
        self.max_pivots = max_pivots or 50 * (m + n_std + n_art + 10)
        self.pivots_total = 0

        if n_art:
            T[m, :] = 0.0
            T[m, :n_std] = T[art_rows, :n_std].sum(axis=0)
            T[m, -1] = T[art_rows, -1].sum()
            allowed = np.ones(n_std + n_art, dtype=np.uint8)
            status, piv = kernels.simplex_pivots(
                T, basis, allowed, self.max_pivots, 1e-11, 1e-9, bland_after)
            self.pivots_total += piv
            if status == 2:
                raise IterationLimit("phase one hit the pivot limit")
            infeas = T[m, -1]
            if infeas > 1e-9 * self.scale_b:
                raise Infeasible(f"phase one residual {infeas:.3g}")
            keep = np.ones(m, dtype=bool)
            for r in range(m):
                if basis[r] >= n_std:
                    row = np.abs(T[r, :n_std])
                    j = int(np.argmax(row)) if n_std else -1
                    if j >= 0 and row[j] > 1e-9:
                        _pivot_inplace(T, r, j)
                        basis[r] = j
                    else:
                        keep[r] = False  # redundant equality
            T = np.ascontiguousarray(np.vstack([T[:m][keep], T[m:]])[:, list(range(n_std)) + [-1]])
            basis = np.ascontiguousarray(basis[keep])
            A, b = A[keep], b[keep]

        self.A = A
        self.b = b
        self.T = np.ascontiguousarray(T)
        self.basis = basis
        self.n_std = n_std
        self.allowed = np.ones(n_std, dtype=np.uint8)
        self._since_refactor = self.REFACTOR_EVERY  # refactor on first use

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def _refactor(self) -> None:
        m = self.m
        if m == 0:
            return
        B = self.A[:, self.basis]
        try:
            sol = np.linalg.solve(B, np.column_stack([self.A, self.b]))
        except np.linalg.LinAlgError:
            return
        self.T[:m, :] = sol
        self._since_refactor = 0

    def maximize(self, c: np.ndarray) -> LPSolution:
        c = np.asarray(c, dtype=float)
        m = self.m
        cs = np.zeros(self.n_std)
        cs[: self.n_vars] = c
        if self._since_refactor >= self.REFACTOR_EVERY:
            self._refactor()
        T = self.T
        cb = cs[self.basis]
        T[m, :-1] = cs - cb @ T[:m, :-1]
        T[m, -1] = -(cb @ T[:m, -1])
        tol = 1e-11 * max(1.0, float(np.abs(c).max(initial=0.0)))
        status, piv = kernels.simplex_pivots(
            T, self.basis, self.allowed, self.max_pivots, tol, 1e-9, self.bland_after)
        self.pivots_total += piv
        self._since_refactor += piv
        self._last_c = cs
        if status == 1:
            raise Unbounded("objective unbounded above on the feasible region")
        if status == 2:
            raise IterationLimit("simplex hit the pivot limit")
        x = np.zeros(self.n_std)
        if m:
            try:
                xb = np.linalg.solve(self.A[:, self.basis], self.b)
            except np.linalg.LinAlgError:
                xb = T[:m, -1]
            x[self.basis] = xb
        x = np.maximum(x, 0.0)
        xv = x[: self.n_vars]
        return LPSolution(xv, float(c @ xv), tuple(int(v) for v in self.basis), piv)


    def reduced_costs(self) -> tuple[np.ndarray, np.ndarray]:
        """Multipliers of the last :meth:`maximize` call.

        Returns ``(mu, lam)``: ``mu[j] >= 0`` for the bound ``x_j >= 0`` and
        ``lam[r] >= 0`` for inequality row ``r``, both complementary to the
        returned vertex.
        """
        cs = self._last_c
        if self.m:
            B = self.A[:, self.basis]
            y = np.linalg.solve(B.T, cs[self.basis])
            d = cs - self.A.T @ y
        else:
            d = cs.copy()
        return -d[: self.n_vars], -d[self.n_vars:]


def _pivot_inplace(T: np.ndarray, r: int, e: int) -> None:
    row = T[r] / T[r, e]
    row[e] = 1.0
    f = T[:, e].copy()
    f[r] = 0.0
    T -= np.outer(f, row)
    T[r] = row
    T[:, e] = 0.0
    T[r, e] = 1.0


def solve_lp(lp: LinearProgram) -> LPSolution:
    """Optimal basic feasible solution of ``lp`` (maximisation)."""
    return SimplexSolver(lp).maximize(lp.c)
