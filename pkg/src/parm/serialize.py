"""Plain-text YAML output for plans, payments, audits and equilibria.

Arrays are written row-major, one labelled entry per line, six decimals, so
that outputs diff cleanly and load back with any YAML reader.
"""

from __future__ import annotations

import math

import numpy as np

from .audit import AuditReport, DeviationValue
from .mechanisms import CompensationSchedule, MarketPlan, PenaltySchedule
from .porm_equilibrium import EquilibriumOutcome


def _num(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return ".nan"
    if math.isinf(v):
        return ".inf" if v > 0 else "-.inf"
    out = f"{v:.6f}"
    return "0.000000" if out == "-0.000000" else out


def _array(name: str, a: np.ndarray, indent: str = "") -> list[str]:
    a = np.asarray(a, dtype=float)
    lines = [f"{indent}{name}:"]
    for idx in np.ndindex(a.shape):
        label = name + "".join(f"[{i}]" for i in idx)
        lines.append(f"{indent}  {label}: {_num(a[idx])}")
    return lines


def _notes(notes, indent: str = "") -> list[str]:
    if not notes:
        return [f"{indent}notes: []"]
    out = [f"{indent}notes:"]
    for n in notes:
        escaped = str(n).replace("\\", "\\\\").replace('"', '\\"')
        out.append(f'{indent}  - "{escaped}"')
    return out


def plan_lines(plan: MarketPlan) -> list[str]:
    lines = ["plan:", f"  mode: {plan.mode.value}", f"  objective: {_num(plan.objective)}",
             f"  gap: {plan.gap:.3e}", f"  iterations: {plan.iterations}"]
    for name in ("f", "y", "x", "p"):
        lines += _array(name, getattr(plan, name), "  ")
    lines += _notes(plan.notes, "  ")
    return lines


def compensation_lines(comp: CompensationSchedule) -> list[str]:
    return ["compensation:"] + _array("c", comp.c, "  ")


def penalty_lines(pen: PenaltySchedule) -> list[str]:
    lines = ["penalties:"]
    lines += _array("P", pen.P, "  ")
    lines += _array("P_raw", pen.P_raw, "  ")
    lines += _array("pi_dev", pen.pi_dev, "  ")
    lines.append(f"  residual: {pen.residual:.3e}")
    lines.append(f"  undefined: [{', '.join(str(t) for t in pen.undefined)}]")
    return lines


def audit_lines(rep: AuditReport) -> list[str]:
    lines = ["audit:", f"  pass: {'true' if rep.passed else 'false'}", f"  tolerance: {rep.tol:.1e}",
             "  residuals:"]
    for k, v in rep.residuals.items():
        lines.append(f"    {k}: {v:.3e}")
    lines += _array("pi", rep.pi, "  ")
    lines += _array("stationary", rep.stationary_residuals, "  ")
    lines += _notes(rep.notes, "  ")
    return lines


def deviation_lines(dv: DeviationValue) -> list[str]:
    lines = [f"- true_type: {dv.true_type}", f"  reported_type: {dv.reported_type}",
             f"  expected_value: {_num(dv.expected_value)}", "  states:"]
    for (i, t, paid), v in sorted(dv.value_by_state.items()):
        act = dv.best_action_by_state[(i, t, paid)]
        lines.append(f"    \"({i},{t},{'paid' if paid else 'unpaid'})\": "
                     f"{{value: {_num(v)}, action: \"{act}\"}}")
    lines += _notes(dv.notes, "  ")
    return lines


def equilibrium_lines(eq: EquilibriumOutcome) -> list[str]:
    lines = ["equilibrium:", f"  preferred: {eq.preferred}", f"  corner: {'true' if eq.corner else 'false'}"]
    for name in ("x", "served", "idle", "prices"):
        lines += _array(name, getattr(eq, name), "  ")
    lines += [f"  revenue: {_num(eq.revenue)}", f"  welfare: {_num(eq.welfare)}"]
    lines += _notes(eq.notes, "  ")
    return lines


def dump(*sections: list[str]) -> str:
    return "\n".join(line for sec in sections for line in sec) + "\n"
