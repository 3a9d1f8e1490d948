"""Revenue and welfare accounting for plans and equilibrium outcomes."""

from __future__ import annotations

import numpy as np

from .economy import Economy
from .mechanisms import CompensationSchedule, MarketPlan
from .porm_equilibrium import EquilibriumOutcome


def revenue(outcome: MarketPlan | EquilibriumOutcome,
            comp: CompensationSchedule | None = None) -> float:
    """Per-period platform revenue: fares collected minus driver pay.

    A plan needs its compensation schedule; an equilibrium outcome carries
    its own realised revenue.
    """
    if isinstance(outcome, EquilibriumOutcome):
        return float(outcome.revenue)
    if comp is None:
        raise ValueError("a compensation schedule is required for a market plan")
    plan = outcome
    fares = float(np.sum(plan.p[:, :, None] * plan.f))
    pay = float(np.sum(comp.c[:, None, :] * plan.dispatch))
    return fares - pay


def welfare(e: Economy, outcome: MarketPlan | EquilibriumOutcome) -> float:
    """Rider surplus-plus-fares, location utility, minus drivers' outside option.

    With Uniform[0, 1] values, riders served at price ``p`` have mean value
    ``(1 + p) / 2``.
    """
    if isinstance(outcome, EquilibriumOutcome):
        return float(outcome.welfare)
    plan = outcome
    F = plan.total_flow
    riders = float(np.sum(F * (1.0 + plan.p) / 2.0))
    home = float(np.trace(plan.x))
    return riders + e.idio * home - e.W * float(plan.x.sum())
