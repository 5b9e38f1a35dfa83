"""Bi-objective benchmark problems: Rastrigin paired with an MGH objective.

Every MGH objective is a sum of squares ``f(x) = sum_j r_j(x)^2`` built from
the Moré–Garbow–Hillstrom residual definitions, with gradient
``2 J_r(x)^T r(x)``. Residuals and their Jacobians are written out by hand
so that the gradient check below is a genuine test.

For the functions whose residual count is free (linear family, Chebyquad)
the count equals ``n``. The penalty constant of Penalty I/II is ``1e-5``.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidDimension, InvalidInput, NonFiniteValue, UnknownProblem
from .problem import FeasibleSet, MultiObjectiveProblem, Objective, contains

PENALTY_A = 1e-5
DEFAULT_A = 5.12
DEFAULT_N = 4

ResidualPair = tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]


# ---------------------------------------------------------------- Rastrigin

def make_rastrigin(n: int) -> Objective:
    if n < 1:
        raise InvalidDimension("Rastrigin needs n >= 1")
    two_pi = 2.0 * math.pi
    const = 10.0 * n

    def f(x):
        return float(const + np.sum(x * x - 10.0 * np.cos(two_pi * x)))

    def grad(x):
        return 2.0 * x + 20.0 * math.pi * np.sin(two_pi * x)

    return Objective("rastrigin", f, grad)


# ---------------------------------------------------------------- MGH residuals
# Each factory takes n and returns (residual, jacobian) closures.

def _extended_rosenbrock(n):
    odd = np.arange(0, n, 2)
    even = odd + 1

    def res(x):
        r = np.empty(n)
        r[odd] = 10.0 * (x[even] - x[odd] ** 2)
        r[even] = 1.0 - x[odd]
        return r

    def jac(x):
        J = np.zeros((n, n))
        J[odd, odd] = -20.0 * x[odd]
        J[odd, even] = 10.0
        J[even, odd] = -1.0
        return J

    return res, jac


def _extended_powell_singular(n):
    i1 = np.arange(0, n, 4)
    i2, i3, i4 = i1 + 1, i1 + 2, i1 + 3
    s5, s10 = math.sqrt(5.0), math.sqrt(10.0)

    def res(x):
        r = np.empty(n)
        r[i1] = x[i1] + 10.0 * x[i2]
        r[i2] = s5 * (x[i3] - x[i4])
        r[i3] = (x[i2] - 2.0 * x[i3]) ** 2
        r[i4] = s10 * (x[i1] - x[i4]) ** 2
        return r

    def jac(x):
        J = np.zeros((n, n))
        J[i1, i1] = 1.0
        J[i1, i2] = 10.0
        J[i2, i3] = s5
        J[i2, i4] = -s5
        t = 2.0 * (x[i2] - 2.0 * x[i3])
        J[i3, i2] = t
        J[i3, i3] = -2.0 * t
        u = 2.0 * s10 * (x[i1] - x[i4])
        J[i4, i1] = u
        J[i4, i4] = -u
        return J

    return res, jac


def _penalty_1(n):
    sa = math.sqrt(PENALTY_A)

    def res(x):
        r = np.empty(n + 1)
        r[:n] = sa * (x - 1.0)
        r[n] = x @ x - 0.25
        return r

    def jac(x):
        J = np.zeros((n + 1, n))
        J[np.arange(n), np.arange(n)] = sa
        J[n] = 2.0 * x
        return J

    return res, jac


def _penalty_2(n):
    sa = math.sqrt(PENALTY_A)
    i = np.arange(2, n + 1)
    y = np.exp(i / 10.0) + np.exp((i - 1) / 10.0)
    e_tenth = math.exp(-0.1)
    weights = np.arange(n, 0, -1, dtype=float)

    def res(x):
        e = np.exp(x / 10.0)
        r = np.empty(2 * n)
        r[0] = x[0] - 0.2
        r[1:n] = sa * (e[1:] + e[:-1] - y)
        r[n:2 * n - 1] = sa * (e[1:] - e_tenth)
        r[2 * n - 1] = weights @ (x * x) - 1.0
        return r

    def jac(x):
        e = np.exp(x / 10.0) / 10.0
        J = np.zeros((2 * n, n))
        J[0, 0] = 1.0
        rows = np.arange(1, n)
        J[rows, rows] = sa * e[1:]
        J[rows, rows - 1] = sa * e[:-1]
        J[rows + n - 1, rows] = sa * e[1:]
        J[2 * n - 1] = 2.0 * weights * x
        return J

    return res, jac


def _variably_dimensioned(n):
    j = np.arange(1, n + 1, dtype=float)

    def res(x):
        r = np.empty(n + 2)
        r[:n] = x - 1.0
        s = j @ (x - 1.0)
        r[n] = s
        r[n + 1] = s * s
        return r

    def jac(x):
        J = np.zeros((n + 2, n))
        J[np.arange(n), np.arange(n)] = 1.0
        J[n] = j
        J[n + 1] = 2.0 * (j @ (x - 1.0)) * j
        return J

    return res, jac


def _trigonometric(n):
    i = np.arange(1, n + 1, dtype=float)

    def res(x):
        c = np.cos(x)
        return n - c.sum() + i * (1.0 - c) - np.sin(x)

    def jac(x):
        s = np.sin(x)
        J = np.tile(s, (n, 1))
        J[np.arange(n), np.arange(n)] += i * s - np.cos(x)
        return J

    return res, jac


def _discrete_boundary_value(n):
    h = 1.0 / (n + 1)
    t = np.arange(1, n + 1) * h

    def res(x):
        xp = np.concatenate(([0.0], x, [0.0]))
        return 2.0 * x - xp[:-2] - xp[2:] + 0.5 * h * h * (x + t + 1.0) ** 3

    def jac(x):
        J = np.zeros((n, n))
        idx = np.arange(n)
        J[idx, idx] = 2.0 + 1.5 * h * h * (x + t + 1.0) ** 2
        J[idx[1:], idx[:-1]] = -1.0
        J[idx[:-1], idx[1:]] = -1.0
        return J

    return res, jac


def _discrete_integral_equation(n):
    h = 1.0 / (n + 1)
    t = np.arange(1, n + 1) * h
    # weight[i, j] = (1 - t_i) t_j for j <= i, t_i (1 - t_j) for j > i
    lower = np.tril(np.outer(1.0 - t, t))
    upper = np.triu(np.outer(t, 1.0 - t), k=1)
    weight = 0.5 * h * (lower + upper)

    def res(x):
        return x + weight @ (x + t + 1.0) ** 3

    def jac(x):
        return np.eye(n) + weight * (3.0 * (x + t + 1.0) ** 2)

    return res, jac


def _broyden_tridiagonal(n):
    def res(x):
        xp = np.concatenate(([0.0], x, [0.0]))
        return (3.0 - 2.0 * x) * x - xp[:-2] - 2.0 * xp[2:] + 1.0

    def jac(x):
        J = np.zeros((n, n))
        idx = np.arange(n)
        J[idx, idx] = 3.0 - 4.0 * x
        J[idx[1:], idx[:-1]] = -1.0
        J[idx[:-1], idx[1:]] = -2.0
        return J

    return res, jac


def _broyden_banded(n, ml=5, mu=1):
    band = np.zeros((n, n))
    for i in range(n):
        for j in range(max(0, i - ml), min(n, i + mu + 1)):
            if j != i:
                band[i, j] = 1.0

    def res(x):
        return x * (2.0 + 5.0 * x * x) + 1.0 - band @ (x * (1.0 + x))

    def jac(x):
        J = -band * (1.0 + 2.0 * x)
        J[np.arange(n), np.arange(n)] = 2.0 + 15.0 * x * x
        return J

    return res, jac


def _brown_almost_linear(n):
    def res(x):
        r = x + (x.sum() - (n + 1))
        r[n - 1] = np.prod(x) - 1.0
        return r

    def jac(x):
        J = np.ones((n, n)) + np.eye(n)
        # product of all entries but the k-th, without dividing by x_k
        left = np.concatenate(([1.0], np.cumprod(x[:-1])))
        right = np.concatenate((np.cumprod(x[::-1][:-1])[::-1], [1.0]))
        J[n - 1] = left * right
        return J

    return res, jac


def _linear_full_rank(n, m=None):
    m = n if m is None else m

    def res(x):
        r = np.full(m, -2.0 * x.sum() / m - 1.0)
        r[:n] += x
        return r

    def jac(x):
        J = np.full((m, n), -2.0 / m)
        J[np.arange(n), np.arange(n)] += 1.0
        return J

    return res, jac


def _linear_rank_1(n, m=None):
    m = n if m is None else m
    i = np.arange(1, m + 1, dtype=float)
    j = np.arange(1, n + 1, dtype=float)
    J = np.outer(i, j)

    def res(x):
        return i * (j @ x) - 1.0

    def jac(x):
        return J.copy()

    return res, jac


def _linear_rank_1_zero(n, m=None):
    m = n if m is None else m
    i = np.concatenate(([0.0], np.arange(1, m - 1, dtype=float), [0.0]))
    j = np.arange(1, n + 1, dtype=float)
    j[0] = 0.0
    j[n - 1] = 0.0
    J = np.outer(i, j)

    def res(x):
        return i * (j @ x) - 1.0

    def jac(x):
        return J.copy()

    return res, jac


def _chebyquad(n, m=None):
    m = n if m is None else m
    k = np.arange(1, m + 1)
    integral = np.zeros(m)
    even = k % 2 == 0
    integral[even] = -1.0 / (k[even] ** 2 - 1.0)

    def _cheb(x):
        # shifted Chebyshev values T_k(2x - 1) and derivatives w.r.t. x, k = 1..m
        y = 2.0 * x - 1.0
        T = np.empty((m + 1, n))
        dT = np.empty((m + 1, n))
        T[0], dT[0] = 1.0, 0.0
        T[1], dT[1] = y, 1.0
        for q in range(1, m):
            T[q + 1] = 2.0 * y * T[q] - T[q - 1]
            dT[q + 1] = 2.0 * T[q] + 2.0 * y * dT[q] - dT[q - 1]
        return T[1:], 2.0 * dT[1:]

    def res(x):
        T, _ = _cheb(x)
        return T.mean(axis=1) - integral

    def jac(x):
        _, dT = _cheb(x)
        return dT / n

    return res, jac


@dataclass(frozen=True)
class MGHEntry:
    display: str
    factory: Callable[[int], ResidualPair]
    multiple_of: int = 1
    min_n: int = 1


MGH_FUNCTIONS: dict[str, MGHEntry] = {
    "extended_rosenbrock": MGHEntry("Extended Rosenbrock", _extended_rosenbrock, multiple_of=2),
    "extended_powell_singular": MGHEntry("Extended Powell Singular", _extended_powell_singular, multiple_of=4),
    "penalty_1": MGHEntry("Penalty I", _penalty_1),
    "penalty_2": MGHEntry("Penalty II", _penalty_2, min_n=2),
    "variably_dimensioned": MGHEntry("Variably Dimensioned", _variably_dimensioned),
    "trigonometric": MGHEntry("Trigonometric", _trigonometric),
    "discrete_boundary_value": MGHEntry("Discrete Boundary Value", _discrete_boundary_value),
    "discrete_integral_equation": MGHEntry("Discrete Integral Equation", _discrete_integral_equation),
    "broyden_tridiagonal": MGHEntry("Broyden Tridiagonal", _broyden_tridiagonal),
    "broyden_banded": MGHEntry("Broyden Banded", _broyden_banded),
    "brown_almost_linear": MGHEntry("Brown Almost Linear", _brown_almost_linear, min_n=2),
    "linear_full_rank": MGHEntry("Linear", _linear_full_rank),
    "linear_rank_1": MGHEntry("Linear-1", _linear_rank_1),
    "linear_rank_1_zero": MGHEntry("Linear-0", _linear_rank_1_zero, min_n=3),
    "chebyquad": MGHEntry("Chebyquad", _chebyquad),
}

MGH_NAMES = tuple(MGH_FUNCTIONS)

_ALIASES = {
    "linear": "linear_full_rank",
    "linear_1": "linear_rank_1",
    "linear_0": "linear_rank_1_zero",
    "penalty_i": "penalty_1",
    "penalty_ii": "penalty_2",
}


def canonical_name(name: str) -> str:
    """Map a display name such as ``"Extended Rosenbrock"`` or ``"Linear-1"``
    to its snake-case registry key."""
    key = re.sub(r"[^0-9a-z]+", "_", name.strip().lower()).strip("_")
    key = _ALIASES.get(key, key)
    if key not in MGH_FUNCTIONS:
        raise UnknownProblem(f"{name!r} is not one of {', '.join(MGH_NAMES)}")
    return key


def mgh_residuals(name: str, n: int) -> ResidualPair:
    key = canonical_name(name)
    entry = MGH_FUNCTIONS[key]
    if n < entry.min_n or n % entry.multiple_of:
        raise InvalidDimension(
            f"{entry.display} needs n >= {entry.min_n} and n divisible by {entry.multiple_of}; got n={n}"
        )
    return entry.factory(n)


def make_mgh(name: str, n: int) -> Objective:
    key = canonical_name(name)
    res, jac = mgh_residuals(key, n)

    def f(x):
        r = res(x)
        return float(r @ r)

    def grad(x):
        return 2.0 * (jac(x).T @ res(x))

    return Objective(key, f, grad)


# ---------------------------------------------------------------- benchmarks

@dataclass(frozen=True)
class BenchmarkSpec:
    mgh_name: str
    n: int
    a: float
    start_grid: tuple[np.ndarray, ...]


def standard_start_grid(n: int = DEFAULT_N, a: float = DEFAULT_A) -> list[np.ndarray]:
    """The 81 starting points with every coordinate in ``{-a, 0, a}``.

    Ordered lexicographically in the multi-index ``(i, j, k, l)``, so index 0
    is ``(-a, -a, -a, -a)`` and index 40 is the origin.
    """
    if n != 4:
        raise InvalidDimension("the standard start grid is defined for n = 4")
    levels = (-float(a), 0.0, float(a))
    return [np.array(p) for p in itertools.product(levels, repeat=n)]


def build_benchmark(mgh_name: str, n: int = DEFAULT_N, a: float = DEFAULT_A) -> MultiObjectiveProblem:
    """Rastrigin and an MGH objective on the cube ``[-a, a]^n``."""
    if a <= 0:
        raise InvalidInput("box half-width a must be positive")
    second = make_mgh(mgh_name, n)
    return MultiObjectiveProblem(
        second.name,
        (make_rastrigin(n), second),
        FeasibleSet.cube(n, a),
        {"a": float(a), "display": MGH_FUNCTIONS[second.name].display},
    )


def benchmark_spec(mgh_name: str, n: int = DEFAULT_N, a: float = DEFAULT_A) -> BenchmarkSpec:
    key = canonical_name(mgh_name)
    mgh_residuals(key, n)
    grid = tuple(standard_start_grid(n, a))
    box = FeasibleSet.cube(n, a)
    assert all(contains(box, p) for p in grid)
    return BenchmarkSpec(key, n, float(a), grid)


def registered_objectives(n: int = DEFAULT_N) -> list[Objective]:
    """Rastrigin followed by the 15 MGH objectives at dimension ``n``."""
    return [make_rastrigin(n)] + [make_mgh(name, n) for name in MGH_NAMES]


# ---------------------------------------------------------------- gradient check

@dataclass(frozen=True)
class GradCheckReport:
    name: str
    max_rel_error: dict[str, float]
    tol: float
    passed: bool


def _fd_relative_error(obj: Objective, x: np.ndarray, h: float) -> float:
    g = np.asarray(obj.grad(x), dtype=float)
    fd = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        fp, fm = obj.f(x + e), obj.f(x - e)
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NonFiniteValue(f"{obj.name}: non-finite value near x={x}")
        fd[j] = (fp - fm) / (2.0 * h)
    if not np.all(np.isfinite(g)):
        raise NonFiniteValue(f"{obj.name}: non-finite gradient at x={x}")
    return float(np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g)))


def check_gradient(objective: Objective, points, h: float = 1e-6, tol: float = 1e-5) -> GradCheckReport:
    """Compare the analytic gradient with central differences at ``points``."""
    return check_gradients(objective.name, [objective], points, h, tol)


def check_gradients(name: str, objectives, points, h: float = 1e-6, tol: float = 1e-5) -> GradCheckReport:
    if h <= 0:
        raise InvalidInput("finite-difference step must be positive")
    errors = {}
    for obj in objectives:
        worst = 0.0
        for x in points:
            worst = max(worst, _fd_relative_error(obj, np.asarray(x, dtype=float), h))
        errors[obj.name] = worst
    return GradCheckReport(name, errors, tol, all(e <= tol for e in errors.values()))


def sample_box(rng: np.random.Generator, n: int, a: float, count: int) -> np.ndarray:
    return rng.uniform(-a, a, size=(count, n))
