"""Benchmark problems on the unit square.

Sources ``f`` are written out by hand from the exact solutions; the test
suite cross-checks them against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .forms import ProblemSpec

PI2 = 2.0 * np.pi
CASES = ("ex1a", "ex1b", "ex2", "ex3", "ex4", "zero")


@dataclass
class ExampleCase:
    name: str
    spec: ProblemSpec
    has_exact: bool
    params: dict


def _xy(p):
    p = np.atleast_2d(p)
    return p[:, 0], p[:, 1]


def _source(nu, b, divb, c, u, grad_u, lap_u):
    def f(p):
        bv = b(p)
        gu = grad_u(p)
        return -nu * lap_u(p) + divb(p) * u(p) + np.sum(bv * gu, 1) + c(p) * u(p)
    return f


def ex1a(nu):
    """Smooth solution, convection field that is not divergence free."""

    def b(p):
        x, y = _xy(p)
        return np.column_stack([x * x * y + 1.0, x * y * y + 1.0])

    def divb(p):
        x, y = _xy(p)
        return 4.0 * x * y

    def c(p):
        return np.ones(len(np.atleast_2d(p)))

    def u(p):
        x, y = _xy(p)
        return np.sin(PI2 * x) * np.sin(PI2 * y)

    def grad_u(p):
        x, y = _xy(p)
        return PI2 * np.column_stack([np.cos(PI2 * x) * np.sin(PI2 * y), np.sin(PI2 * x) * np.cos(PI2 * y)])

    def lap_u(p):
        return -2.0 * PI2**2 * u(p)

    f = _source(nu, b, divb, c, u, grad_u, lap_u)
    return ProblemSpec(nu, b, c, f, u, u=u, grad_u=grad_u, div_b=divb)


def ex1b(nu):
    """Smooth solution, divergence-free rotation-like field, variable reaction."""

    def b(p):
        x, y = _xy(p)
        return np.column_stack([y, x])

    def divb(p):
        return np.zeros(len(np.atleast_2d(p)))

    def c(p):
        x, y = _xy(p)
        return np.exp(x + y)

    def u(p):
        x, y = _xy(p)
        return np.sin(PI2 * x) * np.sin(PI2 * y) + x**5 + y**5 + 1.0

    def grad_u(p):
        x, y = _xy(p)
        return np.column_stack([
            PI2 * np.cos(PI2 * x) * np.sin(PI2 * y) + 5.0 * x**4,
            PI2 * np.sin(PI2 * x) * np.cos(PI2 * y) + 5.0 * y**4,
        ])

    def lap_u(p):
        x, y = _xy(p)
        return -2.0 * PI2**2 * np.sin(PI2 * x) * np.sin(PI2 * y) + 20.0 * x**3 + 20.0 * y**3

    f = _source(nu, b, divb, c, u, grad_u, lap_u)
    return ProblemSpec(nu, b, c, f, u, u=u, grad_u=grad_u, div_b=divb)


def ex2(nu, l1=0.5, l2=0.05):
    """Interior layer at ``x = l1`` of width ``l2`` (tanh profile)."""

    def b(p):
        return np.tile([1.0, 0.0], (len(np.atleast_2d(p)), 1))

    def divb(p):
        return np.zeros(len(np.atleast_2d(p)))

    def c(p):
        return np.ones(len(np.atleast_2d(p)))

    def parts(p):
        x, y = _xy(p)
        th = np.tanh((l1 - x) / l2)
        sech2 = 1.0 - th * th
        T = 1.0 - th
        dT = sech2 / l2
        d2T = 2.0 * sech2 * th / l2**2
        P, dP = x * (1.0 - x), 1.0 - 2.0 * x
        Q, dQ = y * (1.0 - y), 1.0 - 2.0 * y
        return P, dP, Q, dQ, T, dT, d2T

    def u(p):
        P, _, Q, _, T, _, _ = parts(p)
        return 0.5 * P * Q * T

    def grad_u(p):
        P, dP, Q, dQ, T, dT, _ = parts(p)
        return np.column_stack([0.5 * Q * (dP * T + P * dT), 0.5 * P * T * dQ])

    def lap_u(p):
        P, dP, Q, _, T, dT, d2T = parts(p)
        uxx = 0.5 * Q * (-2.0 * T + 2.0 * dP * dT + P * d2T)
        uyy = -P * T
        return uxx + uyy

    f = _source(nu, b, divb, c, u, grad_u, lap_u)
    return ProblemSpec(nu, b, c, f, u, u=u, grad_u=grad_u, div_b=divb)


def ex3(nu):
    """Boundary layers along ``x = 1`` and ``y = 1``.

    Exponentials only appear with non-positive arguments, so for tiny ``nu``
    they underflow to zero and leave the outer solution ``x + y (1 - x)``.
    """
    D = -np.expm1(-1.0 / nu)
    tail = np.exp(-1.0 / nu) / D

    def b(p):
        return np.ones((len(np.atleast_2d(p)), 2))

    def divb(p):
        return np.zeros(len(np.atleast_2d(p)))

    def c(p):
        return np.zeros(len(np.atleast_2d(p)))

    def E(x, y):
        return np.exp(-(1.0 - x) * (1.0 - y) / nu)

    def u(p):
        x, y = _xy(p)
        return x + y * (1.0 - x) + tail - E(x, y) / D

    def grad_u(p):
        x, y = _xy(p)
        e = E(x, y) / (nu * D)
        return np.column_stack([(1.0 - y) * (1.0 - e), (1.0 - x) * (1.0 - e)])

    def lap_u(p):
        x, y = _xy(p)
        e = E(x, y) / (nu * nu * D)
        return -e * ((1.0 - y) ** 2 + (1.0 - x) ** 2)

    f = _source(nu, b, divb, c, u, grad_u, lap_u)
    return ProblemSpec(nu, b, c, f, u, u=u, grad_u=grad_u, div_b=divb)


def ex4_boundary(p, tol=1e-12):
    """Discontinuous Dirichlet data: 1 on the bottom side and on x = 0, y <= 1/5."""
    x, y = _xy(p)
    one = (y <= tol) | ((x <= tol) & (y <= 0.2))
    return np.where(one, 1.0, 0.0)


def ex4(nu):
    """Internal layer from the jump of the boundary data at (0, 1/5); no exact solution."""
    b = np.array([0.5, np.sqrt(3.0) / 2.0])
    return ProblemSpec(nu, b, 0.0, 0.0, ex4_boundary, div_b=0.0)


def zero(nu):
    """Homogeneous data with unit reaction; the solution is zero."""
    return ProblemSpec(nu, [1.0, 1.0], 1.0, 0.0, 0.0, u=0.0, grad_u=[0.0, 0.0], div_b=0.0)


def make_case(name, nu, l1=0.5, l2=0.05):
    """Build one of :data:`CASES`."""
    if name == "ex1a":
        return ExampleCase(name, ex1a(nu), True, {"nu": nu})
    if name == "ex1b":
        return ExampleCase(name, ex1b(nu), True, {"nu": nu})
    if name == "ex2":
        return ExampleCase(name, ex2(nu, l1, l2), True, {"nu": nu, "l1": l1, "l2": l2})
    if name == "ex3":
        return ExampleCase(name, ex3(nu), True, {"nu": nu})
    if name == "ex4":
        return ExampleCase(name, ex4(nu), False, {"nu": nu})
    if name == "zero":
        return ExampleCase(name, zero(nu), True, {"nu": nu})
    raise InvalidInputError(f"unknown example {name!r}; choose from {', '.join(CASES)}")
