"""Objective oracles: values, derivatives, counters, registry, FD checks."""

import numpy as np
import pytest

from regnewton import (
    NumericalDomainError,
    PROBLEM_NAMES,
    check_gradient_fd,
    check_hvp_fd,
    default_start,
    make_problem,
)


def test_quad_value_and_gradient():
    quad = make_problem("quad", 2)
    assert quad.value(np.array([1.0, 2.0])) == 5.0
    np.testing.assert_array_equal(quad.gradient(np.array([1.0, 2.0])), [2.0, 4.0])
    np.testing.assert_array_equal(quad.hvp(np.array([3.0, -7.0]), np.array([1.0, 0.0])), [2.0, 0.0])


def test_quad_dimension_3():
    quad = make_problem("quad", 3)
    assert quad.value(np.ones(3)) == 3.0
    assert quad.dimension() == 3


def test_scalar_quad():
    sq = make_problem("scalar_quad", 1)
    assert sq.value(np.array([0.5])) == 0.25
    np.testing.assert_array_equal(sq.gradient(np.array([3.0])), [6.0])


def test_rosenbrock_minimum():
    ros = make_problem("rosenbrock", 2)
    assert ros.value(np.array([1.0, 1.0])) == 0.0
    np.testing.assert_array_equal(ros.gradient(np.array([1.0, 1.0])), [0.0, 0.0])
    ros100 = make_problem("rosenbrock", 100)
    assert ros100.value(np.ones(100)) == 0.0


def test_rosenbrock_hvp_at_ones():
    ros = make_problem("rosenbrock", 2)
    np.testing.assert_array_equal(
        ros.hvp(np.array([1.0, 1.0]), np.array([1.0, 0.0])), [802.0, -400.0]
    )


def test_indef_quad_hvp():
    indef = make_problem("indef_quad", 2)
    np.testing.assert_array_equal(indef.hvp(np.zeros(2), np.array([1.0, 1.0])), [-1.0, 1.0])


def test_nc_well_saddle():
    well = make_problem("nc_well", 1)
    np.testing.assert_array_equal(well.gradient(np.array([0.0])), [0.0])
    np.testing.assert_array_equal(well.hvp(np.array([0.0]), np.array([1.0])), [-1.0])


def test_registry_names_and_errors():
    for name in PROBLEM_NAMES:
        n = 1 if name == "scalar_quad" else 4
        oracle = make_problem(name, n)
        assert oracle.dimension() == n
    with pytest.raises(ValueError):
        make_problem("unknown", 2)
    with pytest.raises(ValueError):
        make_problem("scalar_quad", 2)
    with pytest.raises(ValueError):
        make_problem("rosenbrock", 1)


def test_default_starts():
    np.testing.assert_array_equal(default_start("quad", 3), np.ones(3))
    np.testing.assert_array_equal(default_start("rosenbrock", 4), [-1.2, 1.0, -1.2, 1.0])
    # indef_quad starts on the positive-curvature coordinates only; the
    # objective is unbounded below along the others.
    np.testing.assert_array_equal(default_start("indef_quad", 4), [0.0, 1.0, 0.0, 1.0])
    np.testing.assert_array_equal(default_start("nc_well", 2), [0.5, 0.5])


def test_counters_and_hessian_points():
    quad = make_problem("quad", 2)
    x1 = np.array([1.0, 2.0])
    x2 = np.array([3.0, 4.0])
    quad.value(x1)
    quad.gradient(x1)
    quad.hvp(x1, np.ones(2))
    quad.hvp(x1, np.array([0.0, 1.0]))  # same point: one Hessian evaluation
    quad.hvp(x2, np.ones(2))
    quad.hvp(x1, np.ones(2))  # back to x1: a new point again
    c = quad.counters
    assert (c.value_evals, c.gradient_evals, c.hvp_evals) == (1, 1, 4)
    assert c.hessian_points == 3


def test_non_finite_point_rejected():
    quad = make_problem("quad", 2)
    with pytest.raises(NumericalDomainError) as err:
        quad.value(np.array([1.0, np.inf]))
    assert np.isinf(err.value.point[1])
    with pytest.raises(ValueError):
        quad.value(np.ones(3))


def test_fd_gradient_checks():
    assert check_gradient_fd(make_problem("quad", 2), np.array([1.0, 2.0])) <= 1e-6
    assert check_gradient_fd(make_problem("scalar_quad", 1), np.array([0.0])) <= 1e-10
    rng = np.random.default_rng(0)
    ros = make_problem("rosenbrock", 10)
    assert check_gradient_fd(ros, rng.uniform(-2, 2, 10)) <= 1e-5


def test_fd_hvp_checks():
    assert check_hvp_fd(make_problem("quad", 2), np.array([1.0, 2.0]), np.array([0.0, 1.0])) <= 1e-8
    ros = make_problem("rosenbrock", 2)
    assert check_hvp_fd(ros, np.array([-1.2, 1.0]), np.array([1.0, 0.0])) <= 1e-5
    well = make_problem("nc_well", 2)
    assert check_hvp_fd(well, np.array([0.1, 0.1]), np.array([1.0, 1.0])) <= 1e-5


def test_fd_checks_reject_bad_step():
    quad = make_problem("quad", 2)
    with pytest.raises(ValueError):
        check_gradient_fd(quad, np.ones(2), h=0.0)
    with pytest.raises(ValueError):
        check_hvp_fd(quad, np.ones(2), np.ones(2), h=-1.0)
