"""Single outer step: linesearches, NC direction, Lipschitz update, budgets."""

import math

import numpy as np
import pytest

from regnewton import (
    DirectionKind,
    StepParams,
    StepStatus,
    armijo_search,
    lip_estimation,
    make_problem,
    nc_direction,
    nc_linesearch,
    newton_step,
)
from regnewton.oracle import DiagonalQuadratic


def half_square():
    return DiagonalQuadratic(np.array([1.0]))  # phi(x) = x^2/2


def test_armijo_unit_step():
    oracle = half_square()
    hit = armijo_search(
        oracle, np.array([1.0]), np.array([-1.0]), 1.0, StepParams(), value_x=0.5, grad_dot_d=-1.0
    )
    assert hit is not None
    m, alpha, f_trial = hit
    assert (m, alpha, f_trial) == (0, 1.0, 0.0)


def test_armijo_backtracks_twice():
    oracle = half_square()
    # d = -3: m=0 gives phi(-2)=2, m=1 gives phi(-0.5)=0.125 > 0.05,
    # m=2 gives phi(0.25)=0.03125 <= 0.275.
    hit = armijo_search(
        oracle, np.array([1.0]), np.array([-3.0]), 1.0, StepParams(), value_x=0.5, grad_dot_d=-3.0
    )
    assert hit is not None
    m, alpha, f_trial = hit
    assert m == 2 and alpha == 0.25 and f_trial == 0.03125


def test_armijo_exhaustion():
    oracle = half_square()
    hit = armijo_search(
        oracle,
        np.array([1.0]),
        np.array([-3.0]),
        1.0,
        StepParams(m_max=1),
        value_x=0.5,
        grad_dot_d=-3.0,
    )
    assert hit is None
    # Exhaustion consumed exactly m_max + 1 value evaluations.
    assert oracle.counters.value_evals == 2


def test_nc_direction_scaling_and_sign():
    H = np.diag([-2.0, 1.0])
    hvp = lambda v: H @ v
    d = nc_direction(hvp, np.array([1.0, 0.0]), 1.0, np.array([1.0, 0.0]))
    np.testing.assert_allclose(d, [-2.0, 0.0], atol=1e-15)
    d = nc_direction(hvp, np.array([1.0, 0.0]), 1.0, np.array([-1.0, 0.0]))
    np.testing.assert_allclose(d, [2.0, 0.0], atol=1e-15)
    d = nc_direction(hvp, np.array([1.0, 0.0]), 4.0, np.array([1.0, 0.0]))
    assert np.linalg.norm(d) == pytest.approx(0.5, abs=1e-15)
    # Orthogonal gradient: sign(0) treated as +1.
    d = nc_direction(hvp, np.array([1.0, 0.0]), 1.0, np.array([0.0, 1.0]))
    np.testing.assert_allclose(d, [-2.0, 0.0], atol=1e-15)
    with pytest.raises(ValueError):
        nc_direction(hvp, np.zeros(2), 1.0, np.ones(2))


def test_nc_linesearch_accepts_descent():
    well = make_problem("nc_well", 1)
    x = np.array([0.0])
    d = np.array([1.0])  # saddle at 0; any move downhill
    hit = nc_linesearch(well, x, d, 1.0, StepParams(), value_x=0.0)
    assert hit is not None
    m, alpha, f_trial = hit
    assert f_trial <= -1.0 * 0.3 * alpha**2 * 1.0


LIP = dict(omega=1.0, omega_bar=1.0, M=1.0, grad_next_norm=1.0, params=StepParams())


def test_lip_estimation_sol_unit_branches():
    # Small realized descent at a unit SOL step: increase M.
    up = lip_estimation(0.01, DirectionKind.SOL, True, **LIP)
    assert up == 5.0
    # Large realized descent: decrease M. Threshold (4/33)*0.3*0.3 = 0.0109.
    down = lip_estimation(0.05, DirectionKind.SOL, True, **LIP)
    assert down == 0.2
    # With omega_bar = 2 the decrease threshold rises to 0.0873, leaving
    # a dead band between the two tests where M is kept.
    mid = lip_estimation(0.05, DirectionKind.SOL, True, **{**LIP, "omega_bar": 2.0})
    assert mid == 1.0


def test_lip_estimation_sol_backtracked_and_nc():
    # SOL with m > 0: increase threshold tau_plus*beta*mu = 0.15.
    assert lip_estimation(0.1, DirectionKind.SOL, False, **LIP) == 5.0
    # NC: increase threshold (1-2mu)^2 beta^2 mu = 0.4^2*0.25*0.3 = 0.012.
    assert lip_estimation(0.005, DirectionKind.NC, False, **LIP) == 5.0
    assert lip_estimation(0.0125, DirectionKind.NC, False, **LIP) == 1.0
    # Shared decrease branch: mu*tau_minus = 0.09.
    assert lip_estimation(0.1, DirectionKind.NC, False, **LIP) == 0.2
    assert lip_estimation(0.2, DirectionKind.SOL, False, **LIP) == 0.2


def test_lip_estimation_ratio_always_in_three_values():
    rng = np.random.default_rng(2)
    params = StepParams()
    for _ in range(200):
        delta = 10.0 ** rng.uniform(-6, 1)
        kind = DirectionKind.SOL if rng.random() < 0.5 else DirectionKind.NC
        unit = bool(rng.random() < 0.5) and kind is DirectionKind.SOL
        M = 10.0 ** rng.uniform(-2, 3)
        out = lip_estimation(
            delta, kind, unit, 10.0 ** rng.uniform(-3, 0), 10.0 ** rng.uniform(-3, 0),
            M, 10.0 ** rng.uniform(-4, 1), params,
        )
        assert out in (M / 5.0, M, 5.0 * M)


def test_newton_step_on_quadratic():
    quad = make_problem("quad", 5)
    x = np.ones(5)
    out = newton_step(quad, x, omega=0.1, M=1.0, omega_bar=0.1, params=StepParams())
    assert out.status == StepStatus.ACCEPTED
    assert out.d_type is DirectionKind.SOL
    assert out.linesearch_m == 0 and out.stepsize_alpha == 1.0
    assert quad.value(out.x_next) < quad.value(x)
    np.testing.assert_allclose(out.grad_next, quad.gradient(out.x_next))
    assert out.M_next in (0.2, 1.0, 5.0)


def test_newton_step_descent_and_budgets():
    ros = make_problem("rosenbrock", 10)
    x = np.full(10, -0.5)
    params = StepParams(m_max=27)
    value_x = ros.value(x)
    grad_x = ros.gradient(x)
    out = newton_step(ros, x, omega=0.5, M=1.0, omega_bar=0.5, params=params,
                      value_x=value_x, grad_x=grad_x)
    assert out.status == StepStatus.ACCEPTED
    assert out.value_next <= value_x
    assert out.value_evals <= 2 * (params.m_max + 1)
    # Supplied value/gradient are not re-evaluated; one gradient at x_next.
    c = ros.counters
    assert c.gradient_evals == 2


def test_newton_step_nc_branch():
    well = make_problem("nc_well", 3)
    x = np.full(3, 1e-3)  # near the saddle: Hessian ~ -I
    out = newton_step(well, x, omega=0.01, M=1.0, omega_bar=0.01, params=StepParams())
    assert out.status == StepStatus.ACCEPTED
    assert out.d_type is DirectionKind.NC
    assert out.value_next < well.value(x)


def test_newton_step_never_fails_when_omega_matches():
    # With omega = omega_bar and tau <= 1 the inner budget state is
    # unreachable, so the step must come back usable.
    rng = np.random.default_rng(4)
    ros = make_problem("rosenbrock", 6)
    for _ in range(10):
        x = rng.uniform(-2, 2, 6)
        g = np.linalg.norm(ros.gradient(x))
        omega = math.sqrt(g)
        out = newton_step(ros, x, omega=omega, M=1.0, omega_bar=omega, params=StepParams())
        assert out.status == StepStatus.ACCEPTED


def test_newton_step_fail_on_term(monkeypatch):
    import sys

    ns = sys.modules["regnewton.newton_step"]
    from regnewton.capped_cg import CgOutcome

    def fake_cg(hvp, g, cfg):
        return CgOutcome(DirectionKind.TERM, np.zeros_like(g), 3, 4, 1.0)

    monkeypatch.setattr(ns, "capped_cg", fake_cg)
    quad = make_problem("quad", 2)
    out = ns.newton_step(quad, np.ones(2), omega=0.1, M=1.0, omega_bar=0.2, params=StepParams())
    assert out.status == StepStatus.FAIL
    np.testing.assert_array_equal(out.x_next, np.ones(2))
    assert out.M_next == 1.0


def test_step_params_validation():
    with pytest.raises(ValueError):
        StepParams(mu=0.5)
    with pytest.raises(ValueError):
        StepParams(beta=1.0)
    with pytest.raises(ValueError):
        StepParams(gamma=1.0)
    with pytest.raises(ValueError):
        newton_step(make_problem("quad", 2), np.ones(2), omega=0.0, M=1.0, omega_bar=1.0,
                    params=StepParams())
