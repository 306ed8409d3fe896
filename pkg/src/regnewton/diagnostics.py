"""Per-iteration trace records, local-order estimation, benchmark metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "IterationRecord",
    "OrderEstimate",
    "RunMetrics",
    "estimate_local_order",
    "nu_infinity",
    "predicted_local_order",
    "summarize",
]


@dataclass
class IterationRecord:
    """One row of the solve trace.

    The trailing ``trial_*`` / ``fallback_*`` fields expose per-invocation
    oracle usage so evaluation-budget properties can be asserted exactly.
    """

    k: int
    g: float
    eps: float
    omega_t: float
    omega_f: float
    M: float
    d_type: str
    stepsize_alpha: float | None
    linesearch_m: int | None
    used_fallback: bool
    used_secondary_linesearch: bool
    linesearch_exhausted: bool
    value_phi: float
    direction_norm: float | None
    value_evals: int
    gradient_evals: int
    hvp_evals: int
    hessian_points: int
    trial_value_evals: int = 0
    trial_hvp_evals: int = 0
    trial_cg_norm_M: float = math.nan
    trial_cg_rho_bar: float = math.nan
    trial_cg_xi: float = math.nan
    fallback_value_evals: int | None = None
    fallback_hvp_evals: int | None = None
    fallback_cg_norm_M: float | None = None
    fallback_cg_rho_bar: float | None = None
    fallback_cg_xi: float | None = None


@dataclass
class OrderEstimate:
    slope: float
    pairs: int


def estimate_local_order(
    trace: list[IterationRecord],
    g_lo: float = 1e-12,
    g_hi: float = 1e-2,
) -> OrderEstimate | None:
    """Least-squares slope of log g_{k+1} against log g_k in a gradient window.

    A consecutive, strictly decreasing pair qualifies when its gradient
    span [g_{k+1}, g_k] intersects [g_lo, g_hi]; with superlinear decay
    only a handful of iterates land inside any fixed window, so pairs
    straddling its edges are kept. Pairs anchored at the final two
    records are dropped (round-off pollutes the tail near termination).
    Returns None when fewer than 3 pairs qualify.
    """
    gs = [rec.g for rec in trace]
    xs, ys = [], []
    for k in range(len(gs) - 2):
        a, b = gs[k], gs[k + 1]
        if b < a and b <= g_hi and a >= g_lo:
            xs.append(math.log(a))
            ys.append(math.log(b))
    if len(xs) < 3:
        return None
    slope = float(np.polyfit(xs, ys, 1)[0])
    return OrderEstimate(slope=slope, pairs=len(xs))


def nu_infinity(theta: float) -> float:
    """Asymptotic rate-boost exponent in [1/2, 1].

    Positive root of nu = 1/2 + min(theta, 1) * nu / (1 + nu), i.e. of
    nu^2 + (1/2 - theta) nu - 1/2 = 0.
    """
    if theta < 0:
        raise ValueError("theta must be >= 0")
    b = 0.5 - min(theta, 1.0)
    return (-b + math.sqrt(b * b + 2.0)) / 2.0


def predicted_local_order(theta: float) -> float:
    """Predicted slope of log g_{k+1} vs log g_k: 2 beyond theta = 1."""
    return 2.0 if theta > 1.0 else 1.0 + nu_infinity(theta)


@dataclass
class RunMetrics:
    iterations: int
    value_evals: int
    gradient_evals: int
    hvp_evals: int
    hessian_points: int
    normalized_hvps: float
    linesearch_failure_rate: float
    second_linesearch_rate: float
    fallback_rate: float


def summarize(trace: list[IterationRecord], dimension: int) -> RunMetrics:
    """Benchmark metrics for one run; counters come from the last record."""
    if not trace:
        raise ValueError("cannot summarize an empty trace")
    last = trace[-1]
    n_iter = len(trace)
    return RunMetrics(
        iterations=n_iter,
        value_evals=last.value_evals,
        gradient_evals=last.gradient_evals,
        hvp_evals=last.hvp_evals,
        hessian_points=last.hessian_points,
        normalized_hvps=last.hvp_evals / dimension,
        linesearch_failure_rate=sum(r.linesearch_exhausted for r in trace) / n_iter,
        second_linesearch_rate=sum(r.used_secondary_linesearch for r in trace) / n_iter,
        fallback_rate=sum(r.used_fallback for r in trace) / n_iter,
    )
