# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: tableau simplex pivoting and Bellman sweeps.

Semantics match ``parm._fallback`` exactly; the tests run both.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

ctypedef cnp.int64_t i64


cdef inline void _pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t e) noexcept nogil:
    cdef Py_ssize_t rows = T.shape[0], cols = T.shape[1]
    cdef Py_ssize_t i, j
    cdef double piv = T[r, e], f
    for j in range(cols):
        T[r, j] /= piv
    T[r, e] = 1.0
    for i in range(rows):
        if i == r:
            continue
        f = T[i, e]
        if f == 0.0:
            continue
        for j in range(cols):
            T[i, j] -= f * T[r, j]
        T[i, e] = 0.0


def simplex_pivots(double[:, ::1] T, i64[::1] basis, cnp.uint8_t[::1] allowed,
                   long max_pivots, double tol, double piv_tol, long bland_after):
    """Primal simplex on tableau ``T`` (maximisation), in place.

    Rows ``0..m-1`` hold ``B^-1 [A | b]``; row ``m`` holds reduced costs with
    ``-objective`` in the last column.  Returns ``(status, pivots)`` where
    status is 0 optimal, 1 unbounded, 2 pivot limit.
    """
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t N = T.shape[1] - 1
    cdef Py_ssize_t j, r, e, leave
    cdef long pivots = 0, degenerate = 0
    cdef int status = 2
    cdef double best, ratio, best_ratio, a, rhs
    with nogil:
        while pivots < max_pivots:
            e = -1
            if degenerate < bland_after:
                best = tol
                for j in range(N):
                    if allowed[j] and T[m, j] > best:
                        best = T[m, j]
                        e = j
            else:
                for j in range(N):
                    if allowed[j] and T[m, j] > tol:
                        e = j
                        break
            if e < 0:
                status = 0
                break
            leave = -1
            best_ratio = INFINITY
            for r in range(m):
                a = T[r, e]
                if a > piv_tol:
                    rhs = T[r, N]
                    if rhs < 0.0:
                        rhs = 0.0
                    ratio = rhs / a
                    if ratio < best_ratio - 1e-12 * (1.0 + fabs(best_ratio)):
                        best_ratio = ratio
                        leave = r
                    elif ratio <= best_ratio + 1e-12 * (1.0 + fabs(best_ratio)):
                        if leave < 0 or basis[r] < basis[leave]:
                            best_ratio = ratio if ratio < best_ratio else best_ratio
                            leave = r
            if leave < 0:
                status = 1
                break
            if best_ratio <= tol:
                degenerate += 1
            else:
                degenerate = 0
            _pivot(T, leave, e)
            basis[leave] = e
            pivots += 1
    return status, pivots


def bellman_sweeps(double[:, ::1] R, double[:, :, ::1] P, double delta,
                   double[::1] v, double tol, long max_iter):
    """Jacobi value iteration on a dense tabular MDP, updating ``v`` in place.

    Stops when the sup-norm change of one sweep is ``<= tol``.  Returns
    ``(sweeps, last_change)``.
    """
    cdef Py_ssize_t S = R.shape[0], A = R.shape[1]
    cdef Py_ssize_t s, a, t
    cdef long it = 0
    cdef double change = INFINITY, q, best, acc, d
    cdef double[::1] nv = np.empty(S)
    with nogil:
        while it < max_iter:
            change = 0.0
            for s in range(S):
                best = -INFINITY
                for a in range(A):
                    q = R[s, a]
                    if q == -INFINITY:
                        continue
                    acc = 0.0
                    for t in range(S):
                        acc = acc + P[s, a, t] * v[t]
                    q = q + delta * acc
                    if q > best:
                        best = q
                nv[s] = best
            for s in range(S):
                d = fabs(nv[s] - v[s])
                if d > change:
                    change = d
                v[s] = nv[s]
            it += 1
            if change <= tol:
                break
    return it, change
