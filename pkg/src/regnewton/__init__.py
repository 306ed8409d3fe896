"""Matrix-free second-order optimizer with an adaptive regularized Newton-CG core."""

from .capped_cg import CgConfig, CgOutcome, DirectionKind, HistoryMode, capped_cg, iteration_cap
from .diagnostics import (
    IterationRecord,
    OrderEstimate,
    RunMetrics,
    estimate_local_order,
    nu_infinity,
    predicted_local_order,
    summarize,
)
from .driver import (
    Outcome,
    Schedule,
    SolveReport,
    SolverConfig,
    SolverState,
    fallback_trigger,
    regularizers,
    solve,
)
from .newton_step import (
    StepOutcome,
    StepParams,
    StepStatus,
    armijo_search,
    lip_estimation,
    nc_direction,
    nc_linesearch,
    newton_step,
)
from .oracle import (
    EvalCounters,
    NumericalDomainError,
    ObjectiveOracle,
    PROBLEM_NAMES,
    check_gradient_fd,
    check_hvp_fd,
    default_start,
    make_problem,
)

__all__ = [
    "CgConfig",
    "CgOutcome",
    "DirectionKind",
    "EvalCounters",
    "HistoryMode",
    "IterationRecord",
    "NumericalDomainError",
    "ObjectiveOracle",
    "OrderEstimate",
    "Outcome",
    "PROBLEM_NAMES",
    "RunMetrics",
    "Schedule",
    "SolveReport",
    "SolverConfig",
    "SolverState",
    "StepOutcome",
    "StepParams",
    "StepStatus",
    "armijo_search",
    "capped_cg",
    "check_gradient_fd",
    "check_hvp_fd",
    "default_start",
    "estimate_local_order",
    "fallback_trigger",
    "iteration_cap",
    "lip_estimation",
    "make_problem",
    "nc_direction",
    "nc_linesearch",
    "newton_step",
    "nu_infinity",
    "predicted_local_order",
    "regularizers",
    "solve",
    "summarize",
]

__version__ = "0.1.0"
