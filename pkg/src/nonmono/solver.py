"""Nonmonotone multiobjective steepest descent with backtracking.

Each iteration computes the steepest-descent direction ``d = s(x_k)`` over
``Omega - x_k``, then backtracks ``alpha = beta^ell`` until

* at least ``m_k`` objectives satisfy the plain Armijo test
  ``f_i(x+) <= f_i(x_k) + rho alpha g_i^T d``, and
* every objective satisfies the relaxed test with the allowance ``nu_i``
  supplied by the nonmonotonicity rule.

The loop stops once ``||s(x_k)|| <= eps`` or after ``max_iters`` steps.
"""
from __future__ import annotations

import csv
import io
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import rules as _rules
from .errors import (DirectionConditionViolated, InvalidInput, NonFiniteValue,
                     StepSizeTooSmall, SubproblemNotConverged)
from .problem import MultiObjectiveProblem, Tally, contains, evaluate, jacobian, project
from .subproblem import DEFAULT_MAX_ITER, DirectionSolution, ShiftedBox, default_tol, solve_direction

CONVERGED = "Converged"
MAX_ITERATIONS = "MaxIterations"
STEP_TOO_SMALL = "StepSizeTooSmall"
SUBPROBLEM_FAILED = "SubproblemNotConverged"
DIRECTION_VIOLATED = "DirectionConditionViolated"
NON_FINITE = "NonFiniteValue"
STATUSES = (CONVERGED, MAX_ITERATIONS, STEP_TOO_SMALL, SUBPROBLEM_FAILED,
            DIRECTION_VIOLATED, NON_FINITE)


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 1e-4
    beta: float = 0.5
    c1: float = 1.0
    c2: float = 1.0
    mk_schedule: Union[int, str] = 0   # int constant, "half" or "all"
    eps: float = 1e-4
    max_iters: int = 1000
    max_backtracks: int = 60
    sub_tol: Optional[float] = None    # None: scaled default from the gradients
    sub_max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise InvalidInput(f"rho must lie in (0, 1), got {self.rho}")
        if not 0 < self.beta < 1:
            raise InvalidInput(f"beta must lie in (0, 1), got {self.beta}")
        if not (self.c1 > 0 and self.c2 > 0):
            raise InvalidInput("c1 and c2 must be positive")
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise InvalidInput(f"eps must be positive, got {self.eps}")
        if self.max_iters < 0 or self.max_backtracks < 0:
            raise InvalidInput("iteration caps must be nonnegative")
        if self.sub_tol is not None and not self.sub_tol > 0:
            raise InvalidInput("subproblem tolerance must be positive")
        mk = self.mk_schedule
        if isinstance(mk, str):
            if mk not in ("half", "all"):
                raise InvalidInput(f"mk_schedule must be an integer, 'half' or 'all', got {mk!r}")
        elif int(mk) != mk or mk < 0:
            raise InvalidInput(f"constant mk_schedule must be a nonnegative integer, got {mk}")

    def mk(self, m: int) -> int:
        """Number of objectives that must pass the plain Armijo test."""
        if self.mk_schedule == "half":
            return -(-m // 2)
        if self.mk_schedule == "all":
            return m
        v = int(self.mk_schedule)
        if v > m:
            raise InvalidInput(f"m_k = {v} exceeds the number of objectives {m}")
        return v


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """State at iteration ``k`` and the step taken from it.

    The final record of a run has ``alpha``, ``ell``, ``nu`` and ``slopes``
    set to None: it stores the point where the loop stopped.
    """

    k: int
    x: np.ndarray
    F: np.ndarray
    crit: float
    alpha: Optional[float]
    ell: Optional[int]
    nu: Optional[np.ndarray]
    f_evals: int
    jacobian_evals: int
    slopes: Optional[np.ndarray] = None   # g_i(x_k)^T d
    armijo_count: Optional[int] = None
    xi: float = float("nan")
    sub_gap: float = float("nan")
    sub_tol: float = float("nan")


@dataclass(eq=False)
class RunResult:
    problem: str
    rule: str
    status: str
    records: list
    final_x: np.ndarray
    final_F: np.ndarray
    final_crit: float
    wall_time: float
    f_evals: int = 0
    jacobian_evals: int = 0
    message: str = ""
    mk: int = 0

    @property
    def iterations(self) -> int:
        """Number of accepted steps."""
        return sum(1 for r in self.records if r.alpha is not None)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


@dataclass(frozen=True, eq=False)
class LineSearchResult:
    ell: int
    alpha: float
    x_next: np.ndarray
    F_next: np.ndarray
    nu: np.ndarray
    armijo_count: int
    slopes: np.ndarray


def direction(problem: MultiObjectiveProblem, x, config: SolverConfig,
              J=None, tally: Tally | None = None) -> DirectionSolution:
    """``s(x)`` over ``Omega - x``, checked against the descent conditions.

    With ``d = s`` the conditions read ``max_i g_i^T d <= -c1 ||s||^2`` and
    ``||d|| <= c2 ||s||``; both are enforced up to ten times the subproblem
    tolerance.
    """
    x = np.asarray(x, dtype=float)
    if J is None:
        J = jacobian(problem, x, tally)
    tol = config.sub_tol if config.sub_tol is not None else default_tol(J)
    box = ShiftedBox.around(problem.feasible_set, x)
    sol = solve_direction(J, box, tol=tol, max_iter=config.sub_max_iter)
    sq = float(sol.s @ sol.s)
    if sol.max_slope > -config.c1 * sq + 10 * tol:
        if sol.norm > tol:
            raise DirectionConditionViolated(
                f"max slope {sol.max_slope:.6e} exceeds -c1||s||^2 = {-config.c1 * sq:.6e}")
    if sol.norm > config.c2 * sol.norm + 10 * tol:
        raise DirectionConditionViolated("||d|| > c2 ||s||")
    return sol


def line_search(problem: MultiObjectiveProblem, x, F, J, d, state, k: int,
                config: SolverConfig, tally: Tally | None = None,
                mk: int | None = None) -> LineSearchResult:
    """Backtrack ``alpha = beta^ell`` until both acceptance tests hold.

    A trial point where an objective is not finite is rejected and the step
    is shortened.
    """
    if mk is None:
        mk = config.mk(problem.m)
    slopes = np.asarray(J, dtype=float) @ d
    fset = problem.feasible_set
    alpha = 1.0
    for ell in range(config.max_backtracks + 1):
        # x + alpha d lies in Omega up to rounding; clamp the rounding away
        x_t = project(fset, x + alpha * d)
        try:
            F_t = evaluate(problem, x_t, tally)
        except NonFiniteValue:
            F_t = None
        if F_t is not None:
            armijo = F + config.rho * alpha * slopes
            count = int(np.count_nonzero(F_t <= armijo))
            if count >= mk:
                nu = state.relaxation(k, ell, F, F_t)
                if np.all(F_t <= armijo + nu):
                    return LineSearchResult(ell, alpha, x_t, F_t, nu, count, slopes)
        alpha *= config.beta
    raise StepSizeTooSmall(
        f"no step accepted within {config.max_backtracks} backtracks at iteration {k}")


def run(problem: MultiObjectiveProblem, x0, rule, config: SolverConfig | None = None) -> RunResult:
    """Run the method from ``x0`` and return the full trajectory.

    Errors raised inside the loop end the run with a matching status; the
    trajectory up to that point is kept.
    """
    config = config or SolverConfig()
    start = time.perf_counter()
    mk = config.mk(problem.m)
    fset = problem.feasible_set
    x = np.array(x0, dtype=float).reshape(-1)
    if x.size != problem.n:
        raise InvalidInput(f"x0 has dimension {x.size}, problem {problem.name} has {problem.n}")
    if not contains(fset, x):
        warnings.warn(f"{problem.name}: x0 lies outside the feasible set and was projected",
                      stacklevel=2)
        x = project(fset, x)

    tally = Tally()
    records: list[IterationRecord] = []
    status, message = MAX_ITERATIONS, ""
    crit = float("nan")
    try:
        F = evaluate(problem, x, tally)
    except NonFiniteValue as exc:
        return RunResult(problem.name, getattr(rule, "name", str(rule)), NON_FINITE, [],
                         x, np.full(problem.m, np.nan), crit, time.perf_counter() - start,
                         tally.f_evals, tally.jacobian_evals, str(exc), mk)
    state = rule.init(F)

    k = 0
    while True:
        sol = None
        try:
            J = jacobian(problem, x, tally)
            sol = direction(problem, x, config, J)
            crit = sol.norm
            if crit <= config.eps or k >= config.max_iters:
                status = CONVERGED if crit <= config.eps else MAX_ITERATIONS
                records.append(_record(k, x, F, crit, None, tally, sol, config, J))
                break
            step = line_search(problem, x, F, J, sol.s, state, k, config, tally, mk)
        except SubproblemNotConverged as exc:
            status, message = SUBPROBLEM_FAILED, str(exc)
            if exc.solution is not None:
                sol = exc.solution
                crit = sol.norm
        except DirectionConditionViolated as exc:
            status, message = DIRECTION_VIOLATED, str(exc)
        except StepSizeTooSmall as exc:
            status, message = STEP_TOO_SMALL, str(exc)
        except NonFiniteValue as exc:
            status, message = NON_FINITE, str(exc)
        else:
            records.append(_record(k, x, F, crit, step, tally, sol, config, J))
            state.accept(k, step.F_next)
            x, F = step.x_next, step.F_next
            k += 1
            continue
        records.append(_record(k, x, F, crit, None, tally, sol, config, None))
        break

    return RunResult(problem.name, getattr(rule, "name", str(rule)), status, records,
                     x, F, crit, time.perf_counter() - start,
                     tally.f_evals, tally.jacobian_evals, message, mk)


def _record(k, x, F, crit, step, tally, sol, config, J):
    extra = {}
    if sol is not None:
        tol = config.sub_tol if config.sub_tol is not None else (
            default_tol(J) if J is not None else float("nan"))
        extra = dict(xi=sol.xi, sub_gap=sol.gap, sub_tol=tol)
    if step is None:
        return IterationRecord(k, x, F, crit, None, None, None,
                               tally.f_evals, tally.jacobian_evals, **extra)
    return IterationRecord(k, x, F, crit, step.alpha, step.ell, step.nu,
                           tally.f_evals, tally.jacobian_evals,
                           slopes=step.slopes, armijo_count=step.armijo_count, **extra)


# ------------------------------------------------------------------ presets

PRESETS = ("M", "N1", "N2", "Nh")


def preset_solver(name: str, nu_rule=None, **overrides):
    """Rule and configuration of a named benchmark solver.

    ``M`` monotone; ``N1`` averaged reference values with ``eta_k = 0.85/(k+1)``;
    ``N2`` Metropolis allowances with ``tau_k = 1/ln(k+1)``, ``gamma = 8`` and
    ``sigma = |F(x_0)|``; ``Nh`` the averaged allowance combined with plain
    Armijo decrease in ``ceil(m/2)`` objectives. ``nu_rule`` replaces the
    allowance of ``Nh``; keyword overrides go to :class:`SolverConfig`.
    """
    if name == "M":
        rule, cfg = _rules.Monotone(), SolverConfig(mk_schedule=0)
    elif name == "N1":
        rule, cfg = _rules.ZhangHager(), SolverConfig(mk_schedule=0)
    elif name == "N2":
        rule, cfg = _rules.Metropolis(gamma=8.0), SolverConfig(mk_schedule=0)
    elif name == "Nh":
        rule = nu_rule if nu_rule is not None else _rules.ZhangHager()
        cfg = SolverConfig(mk_schedule="half")
    else:
        raise InvalidInput(f"unknown solver preset {name!r}; choose from {', '.join(PRESETS)}")
    if nu_rule is not None and name != "Nh":
        raise InvalidInput("only the Nh preset accepts a replacement allowance rule")
    if overrides:
        cfg = replace(cfg, **overrides)
    return rule, cfg


# ------------------------------------------------------------------ CSV

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def trajectory_header(n: int, m: int) -> list[str]:
    return (["k"] + [f"x_{j + 1}" for j in range(n)] + [f"f_{i + 1}" for i in range(m)]
            + ["crit", "alpha", "ell"] + [f"nu_{i + 1}" for i in range(m)] + ["fevals", "jevals"])


def trajectory_rows(result: RunResult):
    m = result.final_F.size
    for r in result.records:
        nu = [None] * m if r.nu is None else list(r.nu)
        yield ([r.k] + list(r.x) + list(r.F) + [r.crit, r.alpha, r.ell] + nu
               + [r.f_evals, r.jacobian_evals])


def write_trajectory_csv(result: RunResult, dest) -> None:
    """Write one row per record; ``dest`` is a path or a text stream."""
    n, m = result.final_x.size, result.final_F.size
    own = isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__")
    fh = open(dest, "w", newline="") if own else dest
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(n, m))
        for row in trajectory_rows(result):
            w.writerow([_fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def trajectory_csv(result: RunResult) -> str:
    buf = io.StringIO()
    write_trajectory_csv(result, buf)
    return buf.getvalue()
