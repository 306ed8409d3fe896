"""Smooth-objective oracles with evaluation accounting and a problem registry.

Every objective exposes three capabilities: value, gradient, and
Hessian-vector product (HVP). The solver never materializes a Hessian;
all second-order access goes through ``hvp``. Counters track oracle
usage so budget properties can be asserted by tests and benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EvalCounters",
    "NumericalDomainError",
    "ObjectiveOracle",
    "PROBLEM_NAMES",
    "check_gradient_fd",
    "check_hvp_fd",
    "default_start",
    "make_problem",
]


class NumericalDomainError(ArithmeticError):
    """An oracle produced a non-finite result; carries the offending point."""

    def __init__(self, message: str, point: np.ndarray):
        super().__init__(message)
        self.point = np.asarray(point)


@dataclass
class EvalCounters:
    """Snapshot of oracle usage.

    ``hessian_points`` counts distinct points at which any HVP was
    requested (consecutive HVPs at the same point count once), so that
    a block of inner-CG products at a frozen iterate costs one Hessian
    evaluation.
    """

    value_evals: int = 0
    gradient_evals: int = 0
    hvp_evals: int = 0
    hessian_points: int = 0


class ObjectiveOracle:
    """Base class for smooth objectives accessed matrix-free.

    Subclasses implement ``_value``, ``_gradient`` and ``_hvp``; the
    public methods validate inputs, check for non-finite output and
    maintain the evaluation counters. An instance is owned by one solve
    at a time; counters are per-instance.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"dimension must be >= 1, got {n}")
        self._n = n
        self._counts = EvalCounters()
        self._last_hvp_point: np.ndarray | None = None

    def dimension(self) -> int:
        return self._n

    @property
    def counters(self) -> EvalCounters:
        c = self._counts
        return EvalCounters(c.value_evals, c.gradient_evals, c.hvp_evals, c.hessian_points)

    def _check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self._n,):
            raise ValueError(f"expected point of shape ({self._n},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NumericalDomainError("non-finite point", x)
        return x

    def value(self, x: np.ndarray) -> float:
        x = self._check_point(x)
        f = float(self._value(x))
        self._counts.value_evals += 1
        if not np.isfinite(f):
            raise NumericalDomainError("non-finite objective value", x)
        return f

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = self._check_point(x)
        g = np.asarray(self._gradient(x), dtype=np.float64)
        self._counts.gradient_evals += 1
        if not np.all(np.isfinite(g)):
            raise NumericalDomainError("non-finite gradient", x)
        return g

    def hvp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        x = self._check_point(x)
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self._n,):
            raise ValueError(f"expected vector of shape ({self._n},), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericalDomainError("non-finite HVP input vector", v)
        hv = np.asarray(self._hvp(x, v), dtype=np.float64)
        self._counts.hvp_evals += 1
        # Bitwise comparison: the solver issues all inner-CG products at a
        # frozen iterate, so exact equality is the right notion of "same point".
        if self._last_hvp_point is None or not np.array_equal(self._last_hvp_point, x):
            self._counts.hessian_points += 1
            self._last_hvp_point = x.copy()
        if not np.all(np.isfinite(hv)):
            raise NumericalDomainError("non-finite Hessian-vector product", x)
        return hv

    def _value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _hvp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class QuadraticSphere(ObjectiveOracle):
    """phi(x) = ||x||^2, Hessian 2*I."""

    def _value(self, x):
        return float(x @ x)

    def _gradient(self, x):
        return 2.0 * x

    def _hvp(self, x, v):
        return 2.0 * v


class DiagonalQuadratic(ObjectiveOracle):
    """phi(x) = 0.5 x^T D x for a fixed diagonal D."""

    def __init__(self, diag: np.ndarray):
        super().__init__(len(diag))
        self._diag = np.asarray(diag, dtype=np.float64)

    def _value(self, x):
        return 0.5 * float(x @ (self._diag * x))

    def _gradient(self, x):
        return self._diag * x

    def _hvp(self, x, v):
        return self._diag * v


class Rosenbrock(ObjectiveOracle):
    """Chained Rosenbrock: sum_i 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2."""

    def _value(self, x):
        t = x[1:] - x[:-1] ** 2
        return float(100.0 * (t @ t) + np.sum((1.0 - x[:-1]) ** 2))

    def _gradient(self, x):
        g = np.zeros_like(x)
        t = x[1:] - x[:-1] ** 2
        g[:-1] = -400.0 * x[:-1] * t - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * t
        return g

    def _hvp(self, x, v):
        # Tridiagonal Hessian: diag and one off-diagonal band.
        hv = np.zeros_like(v)
        d = 1200.0 * x[:-1] ** 2 - 400.0 * x[1:] + 2.0
        off = -400.0 * x[:-1]
        hv[:-1] = d * v[:-1] + off * v[1:]
        hv[1:] += off * v[:-1] + 200.0 * v[1:]
        return hv


class CoordinateWells(ObjectiveOracle):
    """Separable double-well: sum_i x_i^4/4 - x_i^2/2.

    Saddle at the origin (Hessian -I there), minima at +-1 per coordinate.
    """

    def _value(self, x):
        return float(np.sum(x**4 / 4.0 - x**2 / 2.0))

    def _gradient(self, x):
        return x**3 - x

    def _hvp(self, x, v):
        return (3.0 * x**2 - 1.0) * v


def _scaled_diag(n: int) -> np.ndarray:
    return np.minimum(10.0 ** np.arange(n), 1e6)


def _alternating_diag(n: int) -> np.ndarray:
    d = np.ones(n)
    d[::2] = -1.0
    return d


PROBLEM_NAMES = ("quad", "scalar_quad", "scaled_quad", "rosenbrock", "indef_quad", "nc_well")


def make_problem(name: str, n: int) -> ObjectiveOracle:
    """Build a registry problem by name.

    Raises ``ValueError`` for unknown names or incompatible dimensions.
    """
    if name == "quad":
        return QuadraticSphere(n)
    if name == "scalar_quad":
        if n != 1:
            raise ValueError("scalar_quad is one-dimensional")
        return DiagonalQuadratic(np.array([2.0]))
    if name == "scaled_quad":
        return DiagonalQuadratic(_scaled_diag(n))
    if name == "rosenbrock":
        if n < 2:
            raise ValueError("rosenbrock requires n >= 2")
        return Rosenbrock(n)
    if name == "indef_quad":
        if n < 2:
            raise ValueError("indef_quad requires n >= 2 to be indefinite")
        return DiagonalQuadratic(_alternating_diag(n))
    if name == "nc_well":
        return CoordinateWells(n)
    raise ValueError(f"unknown problem {name!r}; known: {', '.join(PROBLEM_NAMES)}")


def default_start(name: str, n: int) -> np.ndarray:
    """Conventional starting point for each registry problem.

    ``indef_quad`` starts on its positive-curvature coordinates: the
    objective is unbounded below along the negative ones, so a start
    supported on the convex subspace is the meaningful test.
    """
    if name == "rosenbrock":
        x0 = np.empty(n)
        x0[0::2] = -1.2
        x0[1::2] = 1.0
        return x0
    if name == "indef_quad":
        x0 = np.zeros(n)
        x0[1::2] = 1.0
        return x0
    if name == "nc_well":
        return np.full(n, 0.5)
    return np.ones(n)


def check_gradient_fd(oracle: ObjectiveOracle, x: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error of the analytic gradient vs central differences.

    Denominators are floored at 1e-8 so exact zeros do not blow up the ratio.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    x = np.asarray(x, dtype=np.float64)
    g = oracle.gradient(x)
    fd = np.empty_like(g)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        fd[i] = (oracle.value(x + e) - oracle.value(x - e)) / (2.0 * h)
    return float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-8)))


def check_hvp_fd(oracle: ObjectiveOracle, x: np.ndarray, v: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error of hvp(x, v) vs a gradient central difference."""
    if h <= 0:
        raise ValueError("step size must be positive")
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    hv = oracle.hvp(x, v)
    fd = (oracle.gradient(x + h * v) - oracle.gradient(x - h * v)) / (2.0 * h)
    return float(np.max(np.abs(hv - fd) / np.maximum(np.abs(fd), 1e-8)))
