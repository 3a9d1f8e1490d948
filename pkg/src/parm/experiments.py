"""Parameter sweeps comparing the mechanisms, written as CSV."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .economy import Economy, economy_from_dict, make_economy, validate_economy
from .errors import ConfigError, ParmError
from .mechanisms import parm_compensation, solve_first_best, solve_parm, solve_porm
from .metrics import revenue, welfare
from .porm_equilibrium import porm_equilibrium

PARAMS = ("theta_0", "theta_1", "alpha_col0", "I_frac", "s_1")
MECHANISMS = ("fb", "parm", "porm", "porm_eq")
COLUMNS = ("param", "fb_rev", "parm_rev", "porm_rev", "pormeq_rev",
           "fb_wel", "parm_wel", "porm_wel", "pormeq_wel", "parm_gap", "notes")
DEFAULT_POINTS = 101


@dataclass
class SweepSpec:
    base: Economy
    param: str
    grid: list[float]
    mechanisms: tuple[str, ...] = MECHANISMS
    name: str = ""

    def __post_init__(self) -> None:
        if self.param not in PARAMS:
            raise ConfigError("param", f"must be one of {', '.join(PARAMS)}")
        bad = [m for m in self.mechanisms if m not in MECHANISMS]
        if bad:
            raise ConfigError("mechanisms", f"unknown mechanism {bad[0]!r}")
        self.grid = [float(v) for v in self.grid]
        for v in self.grid:
            validate_economy(self.economy_at(v))

    def economy_at(self, value: float) -> Economy:
        e = self.base
        if self.param == "theta_0":
            theta = e.theta.copy()
            theta[0] = value
            return e.replace(theta=theta)
        if self.param == "theta_1":
            theta = e.theta.copy()
            theta[1] = value
            return e.replace(theta=theta)
        if self.param == "alpha_col0":
            # the remaining columns keep their relative shares
            alpha = e.alpha.copy()
            rest = alpha[:, 1:]
            share = rest / rest.sum(axis=1, keepdims=True)
            alpha[:, 0] = value
            alpha[:, 1:] = (1.0 - value) * share
            return e.replace(alpha=alpha)
        if self.param == "I_frac":
            return e.with_idio_frac(value)
        supply = e.supply.copy()
        supply[1] = value
        return e.replace(supply=supply)


@dataclass
class MetricRow:
    param: float
    revenue: dict = field(default_factory=dict)
    welfare: dict = field(default_factory=dict)
    parm_gap: float | None = None
    runtime: float = 0.0
    notes: list[str] = field(default_factory=list)

    def cells(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, str):
                return v
            return f"{v:.10g}"

        out = [fmt(self.param)]
        out += [fmt(self.revenue.get(m)) for m in MECHANISMS]
        out += [fmt(self.welfare.get(m)) for m in MECHANISMS]
        out.append(fmt(self.parm_gap))
        out.append("; ".join(self.notes))
        return out


def _error_cell(exc: Exception) -> str:
    return f"error: {type(exc).__name__}: {exc}"


def evaluate_point(spec: SweepSpec, value: float) -> MetricRow:
    """Run every requested mechanism at one grid value; errors land in cells."""
    start = time.perf_counter()
    row = MetricRow(param=value)
    try:
        e = spec.economy_at(value)
    except ParmError as exc:
        row.notes.append(_error_cell(exc))
        return row
    porm = None
    for mech in spec.mechanisms:
        try:
            if mech == "fb":
                plan = solve_first_best(e)
                row.revenue[mech] = revenue(plan, parm_compensation(e))
                row.welfare[mech] = welfare(e, plan)
            elif mech == "parm":
                plan, comp, _pen = solve_parm(e)
                row.revenue[mech] = revenue(plan, comp)
                row.welfare[mech] = welfare(e, plan)
                row.parm_gap = plan.gap
            elif mech == "porm":
                porm, comp = solve_porm(e)
                row.revenue[mech] = revenue(porm, comp)
                row.welfare[mech] = welfare(e, porm)
            else:
                if porm is None:
                    porm, _ = solve_porm(e)
                eq = porm_equilibrium(e, porm)
                row.revenue[mech] = eq.revenue
                row.welfare[mech] = eq.welfare
                row.notes.extend(f"porm_eq: {n}" for n in eq.notes)
        except (ParmError, np.linalg.LinAlgError) as exc:
            row.revenue[mech] = _error_cell(exc)
            row.welfare[mech] = _error_cell(exc)
    row.runtime = time.perf_counter() - start
    return row


def _evaluate_star(args):
    return evaluate_point(*args)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[MetricRow]:
    """One row per grid value, in grid order, whatever the completion order."""
    jobs = [(spec, v) for v in spec.grid]
    if workers <= 1:
        return [evaluate_point(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate_star, jobs))


def rows_to_csv(rows: Sequence[MetricRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


def write_csv(rows: Sequence[MetricRow], path: str | Path) -> None:
    Path(path).write_text(rows_to_csv(rows))


# presets ---------------------------------------------------------------------


def _grid(lo: float, hi: float, num: int = DEFAULT_POINTS) -> list[float]:
    return [float(v) for v in np.linspace(lo, hi, num)]


def preset(name: str, num: int = DEFAULT_POINTS) -> SweepSpec:
    """The standard experiment families, by name."""
    unbalanced = [[0.25, 0.75], [0.25, 0.75]]
    local = np.eye(2)
    if name == "vary_theta0":
        base = make_economy([1000, 1000], unbalanced, [100, 100], idio_frac=0.2)
        return SweepSpec(base, "theta_0", _grid(0, 1000, num), ("fb", "parm", "porm"), name)
    if name == "vary_alpha":
        base = make_economy([1000, 1000], unbalanced, [100, 100], idio_frac=0.2)
        return SweepSpec(base, "alpha_col0", _grid(0, 1, num), ("fb", "parm", "porm"), name)
    if name == "vary_I":
        base = make_economy([1000, 1000], local, [0, 200], idio_frac=0.2)
        # I must stay strictly below W
        return SweepSpec(base, "I_frac", _grid(0, 0.99, num), MECHANISMS, name)
    if name == "vary_theta0_eq":
        base = make_economy([1000, 1000], local, [0, 200], idio_frac=0.2)
        return SweepSpec(base, "theta_0", _grid(0, 2000, num), MECHANISMS, name)
    if name == "vary_theta1_eq":
        base = make_economy([1000, 1000], local, [0, 200], idio_frac=0.2)
        return SweepSpec(base, "theta_1", _grid(0, 2000, num), MECHANISMS, name)
    if name == "vary_s1":
        base = make_economy([1000, 1000], local, [0, 200], idio_frac=0.2)
        return SweepSpec(base, "s_1", _grid(0, 1000, num), MECHANISMS, name)
    raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


PRESETS = ("vary_theta0", "vary_alpha", "vary_I", "vary_theta0_eq", "vary_theta1_eq", "vary_s1")


def sweep_from_dict(d: dict) -> SweepSpec:
    """Sweep file: either ``preset: name`` or ``base``/``param``/``grid``.

    ``grid`` is a list of values or ``{start, stop, num}``.  ``mechanisms``
    defaults to all four.
    """
    if not isinstance(d, dict):
        raise ConfigError("<root>", "expected a mapping")
    if "preset" in d:
        num = int(d.get("num", DEFAULT_POINTS))
        spec = preset(str(d["preset"]), num)
        if "mechanisms" in d:
            spec = SweepSpec(spec.base, spec.param, spec.grid, tuple(d["mechanisms"]), spec.name)
        return spec
    for key in ("base", "param", "grid"):
        if key not in d:
            raise ConfigError(key, "missing")
    base = economy_from_dict(d["base"])
    grid = d["grid"]
    if isinstance(grid, dict):
        try:
            grid = _grid(float(grid["start"]), float(grid["stop"]), int(grid.get("num", DEFAULT_POINTS)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("grid", f"expected start/stop/num ({exc})") from None
    elif not isinstance(grid, list):
        raise ConfigError("grid", "expected a list or a start/stop/num mapping")
    mechs = tuple(d.get("mechanisms", MECHANISMS))
    return SweepSpec(base, str(d["param"]), grid, mechs, str(d.get("name", "")))


def load_sweep(path: str | Path) -> SweepSpec:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return sweep_from_dict(data)
