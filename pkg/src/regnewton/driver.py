"""Outer solve loop: regularizer schedules, trial/fallback steps, safeguards.

Each iteration builds a trial regularizer omega_t (possibly shrunk by the
gradient-ratio factor delta^theta) and a conservative fallback omega_f,
attempts a step with the trial value, and re-runs with the fallback value
if the step failed or the gradient behaved non-monotonically. The solve
stops at epsilon-stationarity, on iteration/time limits, or when the
numerical safeguards detect a stall.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .capped_cg import DirectionKind
from .diagnostics import IterationRecord
from .newton_step import StepOutcome, StepParams, StepStatus, newton_step
from .oracle import EvalCounters, NumericalDomainError, ObjectiveOracle

__all__ = [
    "Outcome",
    "Schedule",
    "SolveReport",
    "SolverConfig",
    "SolverState",
    "fallback_trigger",
    "regularizers",
    "solve",
]


class Schedule(enum.Enum):
    GRAD_BASED = "grad"
    EPS_BASED = "eps"
    FIXED = "fixed"


class Outcome(enum.Enum):
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration_limit"
    TIME_LIMIT = "time_limit"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SolverConfig:
    schedule: Schedule = Schedule.GRAD_BASED
    theta: float = 1.0
    lambda_fallback: float = 0.0
    epsilon: float = 1e-5
    max_iterations: int = 100_000
    step_params: StepParams = field(default_factory=StepParams)
    M0: float = 1.0
    stall_window: int = 20
    min_direction_norm: float = 2e-16
    max_M: float = 1e40
    time_limit: float | None = None

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if not 0.0 <= self.lambda_fallback <= 1.0:
            raise ValueError("lambda_fallback must lie in [0, 1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class SolverState:
    """Running quantities of the main loop; g_prev and eps_prev start at g0."""

    x: np.ndarray
    grad: np.ndarray
    g: float
    g_prev: float
    eps: float
    eps_prev: float
    M: float
    k: int = 0


@dataclass
class SolveReport:
    outcome: Outcome
    final_point: np.ndarray
    final_gradient_norm: float
    iterations: int
    counters: EvalCounters
    trace: list[IterationRecord]
    failure_reason: str | None = None


def regularizers(state: SolverState, cfg: SolverConfig) -> tuple[float, float]:
    """Trial and fallback regularizers (omega_t, omega_f) for this iteration."""
    if cfg.schedule is Schedule.FIXED:
        w = math.sqrt(cfg.epsilon)
        return w, w
    if cfg.schedule is Schedule.GRAD_BASED:
        omega_f = math.sqrt(state.g)
        delta = min(1.0, state.g / state.g_prev) if state.g_prev > 0 else 1.0
    else:
        omega_f = math.sqrt(state.eps)
        delta = state.eps / state.eps_prev if state.eps_prev > 0 else 1.0
    return omega_f * delta**cfg.theta, omega_f


def fallback_trigger(g_half: float, g_k: float, g_prev: float, lam: float) -> bool:
    """True when the trial step should be discarded for the conservative one."""
    return lam * g_half > g_k and g_k <= lam * g_prev


def solve(oracle: ObjectiveOracle, x0: np.ndarray, cfg: SolverConfig) -> SolveReport:
    x0 = np.asarray(x0, dtype=np.float64)
    n = oracle.dimension()
    if x0.shape != (n,) or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be a finite vector matching the oracle dimension")

    start_time = time.monotonic()
    try:
        f = oracle.value(x0)
        grad = oracle.gradient(x0)
    except NumericalDomainError as err:
        return SolveReport(
            Outcome.NUMERICAL_FAILURE, x0, math.inf, 0, oracle.counters, [],
            failure_reason=str(err),
        )
    g0 = float(np.linalg.norm(grad))
    state = SolverState(x=x0, grad=grad, g=g0, g_prev=g0, eps=g0, eps_prev=g0, M=cfg.M0)

    trace: list[IterationRecord] = []
    stall_streak = 0

    def report(outcome: Outcome, reason: str | None = None) -> SolveReport:
        return SolveReport(
            outcome=outcome,
            final_point=state.x,
            final_gradient_norm=state.g,
            iterations=state.k,
            counters=oracle.counters,
            trace=trace,
            failure_reason=reason,
        )

    while True:
        if state.g <= cfg.epsilon:
            return report(Outcome.CONVERGED)
        if state.k >= cfg.max_iterations:
            return report(Outcome.ITERATION_LIMIT)
        if cfg.time_limit is not None and time.monotonic() - start_time > cfg.time_limit:
            return report(Outcome.TIME_LIMIT)

        omega_t, omega_f = regularizers(state, cfg)
        try:
            trial = newton_step(
                oracle, state.x, omega_t, state.M, omega_f, cfg.step_params,
                value_x=f, grad_x=state.grad,
            )
            g_half = trial.grad_next_norm
            use_fallback = trial.status == StepStatus.FAIL or fallback_trigger(
                g_half, state.g, state.g_prev, cfg.lambda_fallback
            )
            if use_fallback:
                adopted = newton_step(
                    oracle, state.x, omega_f, state.M, omega_f, cfg.step_params,
                    value_x=f, grad_x=state.grad,
                )
                # With omega = omega_bar and tau <= 1 the inner solver
                # cannot hit its budget state.
                assert adopted.status != StepStatus.FAIL
            else:
                adopted = trial
        except NumericalDomainError as err:
            return report(Outcome.NUMERICAL_FAILURE, reason=str(err))

        counters = oracle.counters
        trace.append(
            IterationRecord(
                k=state.k,
                g=state.g,
                eps=state.eps,
                omega_t=omega_t,
                omega_f=omega_f,
                M=state.M,
                d_type=adopted.d_type.value,
                stepsize_alpha=adopted.stepsize_alpha,
                linesearch_m=adopted.linesearch_m,
                used_fallback=use_fallback,
                used_secondary_linesearch=adopted.used_secondary_linesearch,
                linesearch_exhausted=adopted.linesearch_exhausted,
                value_phi=f,
                direction_norm=adopted.direction_norm,
                value_evals=counters.value_evals,
                gradient_evals=counters.gradient_evals,
                hvp_evals=counters.hvp_evals,
                hessian_points=counters.hessian_points,
                trial_value_evals=trial.value_evals,
                trial_hvp_evals=trial.hvp_evals,
                trial_cg_norm_M=trial.cg.norm_estimate_M if trial.cg else math.nan,
                trial_cg_rho_bar=trial.cg_rho_bar,
                trial_cg_xi=trial.cg_xi,
                fallback_value_evals=adopted.value_evals if use_fallback else None,
                fallback_hvp_evals=adopted.hvp_evals if use_fallback else None,
                fallback_cg_norm_M=(adopted.cg.norm_estimate_M if (use_fallback and adopted.cg) else None),
                fallback_cg_rho_bar=adopted.cg_rho_bar if use_fallback else None,
                fallback_cg_xi=adopted.cg_xi if use_fallback else None,
            )
        )

        f_next = adopted.value_next
        g_next = adopted.grad_next_norm
        if f_next == f and g_next == state.g:
            stall_streak += 1
        else:
            stall_streak = 0

        state.x = adopted.x_next
        state.grad = adopted.grad_next
        f = f_next
        state.g_prev = state.g
        state.eps_prev = state.eps
        state.g = g_next
        state.eps = min(state.eps, g_next)
        state.M = adopted.M_next
        state.k += 1

        if stall_streak >= cfg.stall_window:
            return report(
                Outcome.NUMERICAL_FAILURE,
                reason=f"value and gradient norm unchanged for {cfg.stall_window} iterations",
            )
        if adopted.direction_norm is not None and adopted.direction_norm <= cfg.min_direction_norm:
            return report(Outcome.NUMERICAL_FAILURE, reason="vanishing search direction")
        if state.M >= cfg.max_M:
            return report(Outcome.NUMERICAL_FAILURE, reason="Lipschitz estimate overflow")
