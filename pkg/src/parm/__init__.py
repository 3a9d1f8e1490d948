"""Revenue-optimal ridesharing pricing with driver location preferences.

Solve a market with :func:`solve_parm` (preference-attentive), compare with
:func:`solve_first_best` and :func:`solve_porm` (type-blind), and audit the
result with :func:`verify_steady_state` and :func:`driver_best_response`.
"""

from __future__ import annotations

from .audit import (
    AuditReport,
    DeviationValue,
    driver_best_response,
    lemma2_strategy_value,
    stationary_check,
    verify_steady_state,
)
from .economy import (
    UNBOUNDED,
    DemandCell,
    Economy,
    demand_at_price,
    is_symmetric,
    load_economy,
    make_economy,
    validate_economy,
)
from .errors import (
    ConfigError,
    EmptyType,
    FlowExceedsDemand,
    Infeasible,
    InvalidEconomy,
    IterationLimit,
    NoDispatchPlan,
    NonConvergence,
    ParmError,
    PenaltyUndefined,
    SingularSystem,
    Unbounded,
    UnsupportedClass,
)
from .experiments import MetricRow, SweepSpec, preset, run_sweep
from .kernels import BACKEND
from .lp import LinearProgram, LPSolution, solve_lp
from .mechanisms import (
    CompensationSchedule,
    MarketPlan,
    Mode,
    PenaltySchedule,
    compute_penalties,
    flat_compensation,
    parm_compensation,
    prices_from_flows,
    solve_first_best,
    solve_parm,
    solve_porm,
)
from .metrics import revenue, welfare
from .porm_equilibrium import EquilibriumOutcome, porm_equilibrium
from .qp import QPSolution, QuadraticProgram, build_market_program, maximize_concave_qp

__version__ = "0.1.0"
