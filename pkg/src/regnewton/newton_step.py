"""One outer step: capped-CG direction, stepsize selection, Lipschitz update.

A step first asks capped CG for a direction under the shift
rho = sqrt(M) * omega. A SOL direction goes through Armijo backtracking,
with a secondary search at a shrunken base stepsize if the first one
exhausts its budget. An NC direction is normalized, rescaled by its own
curvature over M, sign-corrected to descend, and accepted under a cubic
decrease test. Afterwards the Lipschitz surrogate M is multiplied or
divided by gamma depending on realized versus predicted descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .capped_cg import CgConfig, CgOutcome, DirectionKind, HistoryMode, capped_cg
from .oracle import ObjectiveOracle

__all__ = [
    "StepParams",
    "StepStatus",
    "StepOutcome",
    "armijo_search",
    "lip_estimation",
    "nc_direction",
    "nc_linesearch",
    "newton_step",
]


@dataclass
class StepParams:
    """Tunables of the step routine; defaults follow the reference setting."""

    mu: float = 0.3
    beta: float = 0.5
    m_max: int = 27  # floor(log_beta 1e-8) for beta = 0.5
    tau: float = 1.0
    tau_minus: float = 0.3
    tau_plus: float = 1.0
    gamma: float = 5.0
    eta: float = 0.01
    abs_residual_cap: float = 0.01
    history_mode: HistoryMode = HistoryMode.REGENERATED

    def __post_init__(self):
        if not 0.0 < self.mu < 0.5:
            raise ValueError("mu must lie in (0, 1/2)")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if not 0.0 < self.tau_minus < 1.0:
            raise ValueError("tau_minus must lie in (0, 1)")
        if not 0.0 < self.tau_plus <= 1.0:
            raise ValueError("tau_plus must lie in (0, 1]")
        if self.gamma <= 1.0:
            raise ValueError("gamma must exceed 1")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.m_max < 0:
            raise ValueError("m_max must be >= 0")


class StepStatus:
    ACCEPTED = "accepted"
    FAIL = "fail"


@dataclass
class StepOutcome:
    status: str
    x_next: np.ndarray
    M_next: float
    d_type: DirectionKind
    stepsize_alpha: float | None = None
    linesearch_m: int | None = None
    used_secondary_linesearch: bool = False
    linesearch_exhausted: bool = False
    direction_norm: float | None = None
    value_next: float = math.nan
    grad_next: np.ndarray = field(default_factory=lambda: np.empty(0))
    grad_next_norm: float = math.nan
    value_evals: int = 0
    hvp_evals: int = 0
    cg: CgOutcome | None = None
    cg_rho: float = math.nan
    cg_rho_bar: float = math.nan
    cg_xi: float = math.nan


def armijo_search(
    oracle: ObjectiveOracle,
    x: np.ndarray,
    d: np.ndarray,
    scale: float,
    params: StepParams,
    value_x: float,
    grad_dot_d: float,
) -> tuple[int, float, float] | None:
    """Smallest m in [0, m_max] with sufficient decrease at stepsize scale*beta^m.

    Returns (m, alpha, trial value) or None on exhaustion. Consumes at
    most m_max + 1 value evaluations; the gradient is supplied, never
    re-evaluated.
    """
    for m in range(params.m_max + 1):
        alpha = scale * params.beta**m
        f_trial = oracle.value(x + alpha * d)
        if f_trial <= value_x + params.mu * alpha * grad_dot_d:
            return m, alpha, f_trial
    return None


def nc_direction(
    hvp_at_x,
    d_tilde: np.ndarray,
    M: float,
    grad: np.ndarray,
) -> np.ndarray:
    """Turn a raw negative-curvature vector into a descent direction.

    The unit direction is scaled by |curvature| / M and sign-corrected
    against the gradient; sign(0) is taken as +1. Costs one HVP.
    """
    norm = float(np.linalg.norm(d_tilde))
    if norm == 0.0:
        raise ValueError("negative-curvature vector must be nonzero")
    d_bar = d_tilde / norm
    curvature = float(d_bar @ hvp_at_x(d_bar))
    length = abs(curvature) / M
    sign = -1.0 if d_bar @ grad < 0.0 else 1.0
    return -length * sign * d_bar


def nc_linesearch(
    oracle: ObjectiveOracle,
    x: np.ndarray,
    d: np.ndarray,
    M: float,
    params: StepParams,
    value_x: float,
) -> tuple[int, float, float] | None:
    """Smallest m in [0, m_max] passing the cubic decrease test
    phi(x + beta^m d) <= phi(x) - M * mu * beta^(2m) * ||d||^3.
    """
    norm_d3 = float(np.linalg.norm(d)) ** 3
    for m in range(params.m_max + 1):
        alpha = params.beta**m
        f_trial = oracle.value(x + alpha * d)
        if f_trial <= value_x - M * params.mu * alpha**2 * norm_d3:
            return m, alpha, f_trial
    return None


def lip_estimation(
    delta: float,
    d_type: DirectionKind,
    unit_sol_step: bool,
    omega: float,
    omega_bar: float,
    M: float,
    grad_next_norm: float,
    params: StepParams,
) -> float:
    """Multiply, divide, or keep M based on realized vs predicted descent."""
    mu, gamma = params.mu, params.gamma
    root_m = math.sqrt(M)
    if d_type is DirectionKind.SOL and unit_sol_step:
        if delta <= (4.0 / 33.0) * mu * params.tau_plus / root_m * min(
            grad_next_norm**2 / omega, omega**3
        ):
            return gamma * M
        if delta >= (4.0 / 33.0) * mu * params.tau_minus / root_m * omega_bar**3:
            return M / gamma
        return M
    if d_type is DirectionKind.SOL and delta <= params.tau_plus * params.beta * mu / root_m * omega**3:
        return gamma * M
    if d_type is DirectionKind.NC and delta <= params.tau_plus * (1.0 - 2.0 * mu) ** 2 * params.beta**2 * mu / root_m * omega**3:
        return gamma * M
    if delta >= mu * params.tau_minus / root_m * omega_bar**3:
        return M / gamma
    return M


def newton_step(
    oracle: ObjectiveOracle,
    x: np.ndarray,
    omega: float,
    M: float,
    omega_bar: float,
    params: StepParams,
    value_x: float | None = None,
    grad_x: np.ndarray | None = None,
) -> StepOutcome:
    """Attempt one step from x with regularizer omega and surrogate M.

    ``value_x`` / ``grad_x`` let the caller supply cached evaluations;
    on acceptance the gradient at the new point is evaluated once and
    returned so the caller can reuse it.
    """
    if omega <= 0 or omega_bar <= 0 or M <= 0:
        raise ValueError("omega, omega_bar and M must be positive")
    if value_x is None:
        value_x = oracle.value(x)
    if grad_x is None:
        grad_x = oracle.gradient(x)

    counts0 = oracle.counters

    def finish(outcome: StepOutcome) -> StepOutcome:
        counts1 = oracle.counters
        outcome.value_evals = counts1.value_evals - counts0.value_evals
        outcome.hvp_evals = counts1.hvp_evals - counts0.hvp_evals
        return outcome

    rho = math.sqrt(M) * omega
    eta_tilde = min(params.eta, rho)
    rho_bar = params.tau * math.sqrt(M) * omega_bar
    cfg = CgConfig(
        rho=rho,
        xi=eta_tilde,
        rho_bar=rho_bar,
        abs_residual_cap=params.abs_residual_cap,
        history_mode=params.history_mode,
    )
    hvp_at_x = lambda v: oracle.hvp(x, v)
    cg = capped_cg(hvp_at_x, grad_x, cfg)

    def stay_put(M_next: float, exhausted: bool, status: str, d_norm: float | None) -> StepOutcome:
        return finish(
            StepOutcome(
                status=status,
                x_next=x,
                M_next=M_next,
                d_type=cg.kind,
                linesearch_exhausted=exhausted,
                direction_norm=d_norm,
                value_next=value_x,
                grad_next=grad_x,
                grad_next_norm=float(np.linalg.norm(grad_x)),
                cg=cg,
                cg_rho=rho,
                cg_rho_bar=rho_bar,
                cg_xi=eta_tilde,
            )
        )

    if cg.kind is DirectionKind.TERM:
        return stay_put(M, exhausted=False, status=StepStatus.FAIL, d_norm=None)

    used_secondary = False
    unit_sol_step = False
    if cg.kind is DirectionKind.SOL:
        d = cg.direction
        grad_dot_d = float(d @ grad_x)
        hit = armijo_search(oracle, x, d, 1.0, params, value_x, grad_dot_d)
        if hit is not None and hit[0] == 0:
            unit_sol_step = True
        if hit is None:
            used_secondary = True
            alpha_hat = min(1.0, math.sqrt(omega) * M**-0.25 / math.sqrt(float(np.linalg.norm(d))))
            hit = armijo_search(oracle, x, d, alpha_hat, params, value_x, grad_dot_d)
        if hit is None:
            out = stay_put(params.gamma * M, exhausted=True, status=StepStatus.ACCEPTED,
                           d_norm=float(np.linalg.norm(d)))
            out.used_secondary_linesearch = True
            return out
    else:
        d = nc_direction(hvp_at_x, cg.direction, M, grad_x)
        hit = nc_linesearch(oracle, x, d, M, params, value_x)
        if hit is None:
            return stay_put(params.gamma * M, exhausted=True, status=StepStatus.ACCEPTED,
                            d_norm=float(np.linalg.norm(d)))

    m, alpha, f_next = hit
    x_next = x + alpha * d
    grad_next = oracle.gradient(x_next)
    grad_next_norm = float(np.linalg.norm(grad_next))
    M_next = lip_estimation(
        delta=value_x - f_next,
        d_type=cg.kind,
        unit_sol_step=unit_sol_step,
        omega=omega,
        omega_bar=omega_bar,
        M=M,
        grad_next_norm=grad_next_norm,
        params=params,
    )
    return finish(
        StepOutcome(
            status=StepStatus.ACCEPTED,
            x_next=x_next,
            M_next=M_next,
            d_type=cg.kind,
            stepsize_alpha=alpha,
            linesearch_m=m,
            used_secondary_linesearch=used_secondary,
            direction_norm=float(np.linalg.norm(d)),
            value_next=f_next,
            grad_next=grad_next,
            grad_next_norm=grad_next_norm,
            cg=cg,
            cg_rho=rho,
            cg_rho_bar=rho_bar,
            cg_xi=eta_tilde,
        )
    )
