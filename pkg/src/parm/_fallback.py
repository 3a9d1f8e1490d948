"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

from __future__ import annotations

import numpy as np


def simplex_pivots(T, basis, allowed, max_pivots, tol, piv_tol, bland_after):
    m = T.shape[0] - 1
    N = T.shape[1] - 1
    allowed = np.asarray(allowed, dtype=bool)
    pivots = 0
    degenerate = 0
    while pivots < max_pivots:
        d = np.where(allowed, T[m, :N], -np.inf)
        if degenerate < bland_after:
            e = int(np.argmax(d))
            if not d[e] > tol:
                return 0, pivots
        else:
            cand = np.flatnonzero(d > tol)
            if cand.size == 0:
                return 0, pivots
            e = int(cand[0])
        col = T[:m, e]
        leave = -1
        best_ratio = np.inf
        for r in np.flatnonzero(col > piv_tol):
            rhs = max(T[r, N], 0.0)
            ratio = rhs / col[r]
            slack = 1e-12 * (1.0 + abs(best_ratio)) if np.isfinite(best_ratio) else 0.0
            if ratio < best_ratio - slack:
                best_ratio = ratio
                leave = r
            elif ratio <= best_ratio + slack:
                if leave < 0 or basis[r] < basis[leave]:
                    best_ratio = min(ratio, best_ratio)
                    leave = r
        if leave < 0:
            return 1, pivots
        degenerate = degenerate + 1 if best_ratio <= tol else 0
        row = T[leave] / T[leave, e]
        row[e] = 1.0
        f = T[:, e].copy()
        f[leave] = 0.0
        T -= np.outer(f, row)
        T[leave] = row
        T[:, e] = 0.0
        T[leave, e] = 1.0
        basis[leave] = e
        pivots += 1
    return 2, pivots


def bellman_sweeps(R, P, delta, v, tol, max_iter):
    it = 0
    change = np.inf
    finite = np.isfinite(R)
    R0 = np.where(finite, R, 0.0)
    while it < max_iter:
        q = R0 + delta * (P @ v)
        q = np.where(finite, q, -np.inf)
        nv = q.max(axis=1)
        change = float(np.max(np.abs(nv - v))) if v.size else 0.0
        v[:] = nv
        it += 1
        if change <= tol:
            break
    return it, change
