"""Multiobjective problems on simple convex feasible sets.

A problem is an immutable bundle of scalar objectives (each with an analytic
gradient) and a feasible set that is either the whole space or an
axis-aligned box. Evaluation counting is kept outside the problem, in a
:class:`Tally` owned by whoever drives the computation, so a single problem
instance can be shared freely between runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInput, NonFiniteValue

ScalarFn = Callable[[np.ndarray], float]
GradFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Objective:
    name: str
    f: ScalarFn
    grad: GradFn


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Either ``whole_space`` (no bounds) or a ``box`` ``lower <= x <= upper``."""

    kind: str
    n: int
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "whole_space":
            object.__setattr__(self, "lower", np.full(self.n, -np.inf))
            object.__setattr__(self, "upper", np.full(self.n, np.inf))
        elif self.kind == "box":
            lo = np.array(self.lower, dtype=float).reshape(-1)
            hi = np.array(self.upper, dtype=float).reshape(-1)
            if lo.shape != (self.n,) or hi.shape != (self.n,):
                raise InvalidInput(f"box bounds must have length {self.n}")
            if np.any(lo > hi):
                raise InvalidInput("box requires lower <= upper componentwise")
            lo.setflags(write=False)
            hi.setflags(write=False)
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        else:
            raise InvalidInput(f"unknown feasible set kind {self.kind!r}")

    @classmethod
    def whole_space(cls, n: int) -> "FeasibleSet":
        return cls("whole_space", n)

    @classmethod
    def box(cls, lower, upper) -> "FeasibleSet":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        return cls("box", lower.size, lower, upper)

    @classmethod
    def cube(cls, n: int, a: float) -> "FeasibleSet":
        """The hypercube ``[-a, a]^n``."""
        return cls("box", n, np.full(n, -float(a)), np.full(n, float(a)))

    def shifted(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Bounds of ``Omega - x``; infinite for whole_space."""
        return self.lower - x, self.upper - x


@dataclass
class Tally:
    f_evals: int = 0
    jacobian_evals: int = 0


@dataclass(frozen=True, eq=False)
class MultiObjectiveProblem:
    name: str
    objectives: tuple[Objective, ...]
    feasible_set: FeasibleSet
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "objectives", tuple(self.objectives))
        if not self.objectives:
            raise InvalidInput("a problem needs at least one objective")

    @property
    def n(self) -> int:
        return self.feasible_set.n

    @property
    def m(self) -> int:
        return len(self.objectives)


def _as_point(problem: MultiObjectiveProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != problem.n:
        raise InvalidInput(
            f"{problem.name}: expected a point of dimension {problem.n}, got shape {x.shape}"
        )
    return x


def evaluate(problem: MultiObjectiveProblem, x, tally: Tally | None = None) -> np.ndarray:
    """Return ``F(x) = (f_1(x), ..., f_m(x))``."""
    x = _as_point(problem, x)
    out = np.array([obj.f(x) for obj in problem.objectives], dtype=float)
    if tally is not None:
        tally.f_evals += problem.m
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue(f"{problem.name}: non-finite objective value {out} at x={x}")
    return out


def jacobian(problem: MultiObjectiveProblem, x, tally: Tally | None = None) -> np.ndarray:
    """Return the ``m x n`` Jacobian whose rows are the objective gradients."""
    x = _as_point(problem, x)
    out = np.empty((problem.m, problem.n))
    for i, obj in enumerate(problem.objectives):
        out[i] = obj.grad(x)
    if tally is not None:
        tally.jacobian_evals += 1
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue(f"{problem.name}: non-finite gradient at x={x}")
    return out


def project(fset: FeasibleSet, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if fset.kind == "whole_space":
        return y.copy()
    return np.minimum(np.maximum(y, fset.lower), fset.upper)


def contains(fset: FeasibleSet, x, tol: float = 0.0) -> bool:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return True
    return bool(np.max(np.abs(x - project(fset, x))) <= tol)


def make_problem(name: str, objectives: Sequence[Objective], fset: FeasibleSet, **meta):
    return MultiObjectiveProblem(name, tuple(objectives), fset, dict(meta))
