"""Strategic driver behaviour under type-blind pricing.

Covered class: two locations, riders never leave their origin, and a single
driver type (all supply prefers one location ``p``; ``o`` is the other).
Prices stay at the type-blind plan.  Drivers pick a location; one who sits
at ``p`` is dispatched with probability ``min(1, D_p / x_p)`` and collects
``I`` every period there, so extra drivers pile up at ``p`` until

    W * D_p / x_p + I = W        i.e.  x_p = W * D_p / (W - I).

Entry stops when a marginal driver no longer beats the outside option:
location ``o`` needs ``D_o`` drivers and ``p`` absorbs ``x_p``, so the
participating mass is ``min(supply, D_o + x_p)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .economy import Economy
from .errors import UnsupportedClass
from .mechanisms import MarketPlan, solve_porm

CLASS_TOL = 1e-12


@dataclass
class EquilibriumOutcome:
    x: np.ndarray
    served: np.ndarray
    idle: np.ndarray
    prices: np.ndarray
    revenue: float
    welfare: float
    corner: bool
    preferred: int = -1
    notes: list[str] = field(default_factory=list)

    @property
    def total_mass(self) -> float:
        return float(self.x.sum())

    def dispatch_probability(self) -> np.ndarray:
        return _dispatch_prob(self.x, self.served)


def _dispatch_prob(x: np.ndarray, demand: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    for i in range(x.size):
        if x[i] > 0:
            out[i] = min(1.0, demand[i] / x[i])
        else:
            out[i] = 1.0 if demand[i] > 0 else 0.0
    return out


def _check_class(e: Economy) -> int | None:
    if e.n != 2:
        raise UnsupportedClass(f"needs two locations, got {e.n}")
    if np.abs(e.alpha - np.eye(2)).max() > CLASS_TOL:
        raise UnsupportedClass("riders must stay within their origin location")
    s = np.asarray(e.supply, dtype=float)
    pos = np.flatnonzero(s > 0)
    if pos.size > 1:
        raise UnsupportedClass("at most one driver type may have positive supply")
    return int(pos[0]) if pos.size else None


def utility_gap(e: Economy, demand: np.ndarray, pref: int, x_pref: float, total: float) -> float:
    """Per-period utility at the preferred location minus that at the other one."""
    other = 1 - pref
    x = np.zeros(2)
    x[pref], x[other] = x_pref, total - x_pref
    q = _dispatch_prob(x, demand)
    return e.W * q[pref] + e.idio - e.W * q[other]


def porm_equilibrium(e: Economy, porm: MarketPlan | None = None, *,
                     method: str = "closed", tol: float = 1e-10) -> EquilibriumOutcome:
    """Equilibrium split of drivers under the type-blind plan's prices.

    ``method="bisection"`` locates the indifference point numerically on
    ``[D_p, M]`` instead of using the closed form; both agree to ``tol``.
    """
    pref = _check_class(e)
    if porm is None:
        porm, _ = solve_porm(e)
    prices = np.diag(porm.p).copy()
    D = np.diag(porm.total_flow).copy()
    W, I = e.W, e.idio
    notes: list[str] = []
    if pref is None:
        z = np.zeros(2)
        return EquilibriumOutcome(z, z.copy(), z.copy(), prices, 0.0, 0.0, False, -1,
                                  ["no driver supply"])
    other = 1 - pref
    supply = float(e.supply[pref])
    x_int = W * D[pref] / (W - I)
    M = min(supply, D[other] + x_int)

    if x_int >= M:
        x_pref, corner = M, True
    elif method == "closed":
        x_pref, corner = x_int, False
    elif method == "bisection":
        lo, hi = min(D[pref], M), M
        if utility_gap(e, D, pref, hi, M) >= 0:
            x_pref, corner = hi, True
        else:
            while hi - lo > tol * max(1.0, M):
                mid = 0.5 * (lo + hi)
                if utility_gap(e, D, pref, mid, M) >= 0:
                    lo = mid
                else:
                    hi = mid
            x_pref, corner = 0.5 * (lo + hi), False
    else:
        raise ValueError(f"unknown method {method!r}")

    x = np.zeros(2)
    x[pref] = x_pref
    x[other] = max(M - x_pref, 0.0)
    served = np.minimum(x, D)
    idle = x - served
    idle[idle <= 1e-12 * max(1.0, M)] = 0.0
    revenue = float(np.sum((prices - W) * served))
    welfare = float(np.sum(served * (1.0 + prices) / 2.0) + I * x[pref] - W * x.sum())

    q = _dispatch_prob(x, D)
    u = W * q + I * (np.arange(2) == pref)
    occupied = x > 0
    if occupied.any() and np.all(u[occupied] < W - 1e-12 * max(1.0, W)):
        notes.append("participation check binds: occupied locations earn less than the outside option")
    if M < porm.x.sum() - 1e-9 * max(1.0, M):
        notes.append("participating mass below the compliant plan's")
    return EquilibriumOutcome(x, served, idle, prices, revenue, welfare, corner, pref, notes)
