"""Capped conjugate gradient on the shifted system (H + 2*rho*I) d = -g.

Standard CG augmented with monitors that abort early with a direction of
provably negative curvature (NC), plus a budget state (TERM) indicating
the shift was too small for the allotted iteration cap. One oracle HVP
per iteration: the products H*y, H*r, H*p needed by the monitors are
maintained by recursion from the single fresh product on the residual.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

__all__ = ["CgConfig", "CgOutcome", "DirectionKind", "HistoryMode", "capped_cg", "iteration_cap"]

Operator = Callable[[np.ndarray], np.ndarray]


class DirectionKind(enum.Enum):
    SOL = "SOL"
    NC = "NC"
    TERM = "TERM"


class HistoryMode(enum.Enum):
    """Whether backtracking replays stored iterates or regenerates them.

    Regenerated saves O(iterations * n) memory at the cost of extra HVPs
    on the rare occasions the slow-decay monitor fires; both modes
    produce bitwise-identical directions.
    """

    STORED = "stored"
    REGENERATED = "regenerated"


@dataclass
class CgConfig:
    rho: float
    xi: float
    rho_bar: float
    abs_residual_cap: float = 0.01
    history_mode: HistoryMode = HistoryMode.REGENERATED

    def __post_init__(self):
        if self.rho <= 0 or self.rho_bar <= 0:
            raise ValueError("rho and rho_bar must be positive")
        if not 0.0 < self.xi < 1.0:
            raise ValueError("xi must lie in (0, 1)")


@dataclass
class CgOutcome:
    kind: DirectionKind
    direction: np.ndarray
    iterations: int
    hvp_count: int
    norm_estimate_M: float
    final_residual_norm: float | None = None


def iteration_cap(M: float, rho_bar: float, xi: float) -> float:
    """Iteration budget J before the TERM state may be declared."""
    kappa = (M + rho_bar) / rho_bar
    rk = math.sqrt(kappa)
    return 1.0 + (rk + 0.5) * math.log(144.0 * (rk + 1.0) ** 2 * kappa**6 / xi**2)


def _safe_ratio(num: float, den: float) -> float:
    return num / den if den > 0.0 else 0.0


def _cg_step(hvp, rho, y, Hy, r, Hr, p, Hp):
    """One plain CG step on the shifted system; exactly one HVP (on the
    new residual). Shared by the main loop and history regeneration so
    the two produce bitwise-identical sequences.
    """
    Hbar_p = Hp + (2.0 * rho) * p
    alpha = (r @ r) / (p @ Hbar_p)
    y = y + alpha * p
    Hy = Hy + alpha * Hp
    r_new = r + alpha * Hbar_p
    Hr_new = hvp(r_new)
    beta = (r_new @ r_new) / (r @ r)
    p = -r_new + beta * p
    Hp = -Hr_new + beta * Hp
    return y, Hy, r_new, Hr_new, p, Hp


def _cg_states(hvp: Operator, g: np.ndarray, rho: float) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (y_i, H y_i) for i = 0, 1, ... of the CG recurrence."""
    y = np.zeros_like(g)
    Hy = np.zeros_like(g)
    r = g.copy()
    p = -g
    Hp = hvp(p)
    Hr = -Hp
    while True:
        yield y, Hy
        y, Hy, r, Hr, p, Hp = _cg_step(hvp, rho, y, Hy, r, Hr, p, Hp)


def capped_cg(hvp: Operator, g: np.ndarray, cfg: CgConfig) -> CgOutcome:
    """Run capped CG; ``hvp`` applies the (unshifted) Hessian at a frozen point."""
    g = np.asarray(g, dtype=np.float64)
    norm_r0 = float(np.linalg.norm(g))
    if norm_r0 == 0.0:
        raise ValueError("capped CG requires a nonzero gradient")
    rho, xi, rho_bar = cfg.rho, cfg.xi, cfg.rho_bar

    hvps = 0

    def apply_h(v: np.ndarray) -> np.ndarray:
        nonlocal hvps
        hvps += 1
        return hvp(v)

    y = np.zeros_like(g)
    Hy = np.zeros_like(g)
    r = g.copy()
    p = -g
    Hp = apply_h(p)
    Hr = -Hp
    M = float(np.linalg.norm(Hp)) / norm_r0

    if p @ (Hp + (2.0 * rho) * p) < rho * (p @ p):
        return CgOutcome(DirectionKind.NC, p.copy(), 0, hvps, M)

    history: list[tuple[np.ndarray, np.ndarray]] = []
    k = 0
    while True:
        if cfg.history_mode is HistoryMode.STORED:
            history.append((y.copy(), Hy.copy()))
        y, Hy, r, Hr, p, Hp = _cg_step(apply_h, rho, y, Hy, r, Hr, p, Hp)
        k += 1

        norm_p = float(np.linalg.norm(p))
        norm_r = float(np.linalg.norm(r))
        norm_y = float(np.linalg.norm(y))
        M = max(
            M,
            _safe_ratio(float(np.linalg.norm(Hp)), norm_p),
            _safe_ratio(float(np.linalg.norm(Hr)), norm_r),
            _safe_ratio(float(np.linalg.norm(Hy)), norm_y),
        )
        kappa = (M + 2.0 * rho) / rho
        xi_hat = xi / (3.0 * kappa)
        tau = math.sqrt(kappa) / (math.sqrt(kappa) + 1.0)
        # For extreme kappa, sqrt(tau) rounds to 1 and the slow-decay
        # threshold is effectively infinite; disable that monitor then.
        denom = (1.0 - math.sqrt(tau)) ** 2
        big_t = 4.0 * kappa**4 / denom if denom > 0.0 else math.inf

        if y @ Hy + (2.0 * rho) * norm_y**2 < rho * norm_y**2:
            return CgOutcome(DirectionKind.NC, y.copy(), k, hvps, M)
        if norm_r <= min(xi_hat * norm_r0, cfg.abs_residual_cap):
            return CgOutcome(DirectionKind.SOL, y.copy(), k, hvps, M, final_residual_norm=norm_r)
        if p @ (Hp + (2.0 * rho) * p) < rho * norm_p**2:
            return CgOutcome(DirectionKind.NC, p.copy(), k, hvps, M)
        if norm_r > math.sqrt(big_t) * tau ** (k / 2.0) * norm_r0:
            d = _slow_decay_backtrack(apply_h, g, rho, k, y, Hy, r, p, Hp, history, cfg.history_mode)
            return CgOutcome(DirectionKind.NC, d, k, hvps, M)
        if k >= iteration_cap(M, rho_bar, xi) + 1.0:
            return CgOutcome(DirectionKind.TERM, y.copy(), k, hvps, M)


def _slow_decay_backtrack(hvp, g, rho, k, y, Hy, r, p, Hp, history, mode) -> np.ndarray:
    """Take one more CG step, then return y_{k+1} - y_i for the smallest i
    whose difference direction has curvature below rho in the shifted
    operator. The slow-decay monitor guarantees such an index exists.
    """
    Hbar_p = Hp + (2.0 * rho) * p
    alpha = (r @ r) / (p @ Hbar_p)
    y_next = y + alpha * p
    Hy_next = Hy + alpha * Hp

    if mode is HistoryMode.STORED:
        iterates: Iterator[tuple[np.ndarray, np.ndarray]] = iter(history)
    else:
        iterates = _cg_states(hvp, g, rho)

    for _, (y_i, Hy_i) in zip(range(k), iterates):
        dy = y_next - y_i
        hdy = Hy_next - Hy_i
        if dy @ hdy + (2.0 * rho) * (dy @ dy) < rho * (dy @ dy):
            return dy
    raise AssertionError("slow-decay monitor fired but no backtrack index qualifies")
