"""Nonmonotone line-search steepest descent for box-constrained multiobjective problems."""

__version__ = "0.1.0"

from .errors import (DirectionConditionViolated, EmptyFront, InvalidDimension, InvalidInput,
                     NonFiniteValue, NonmonoError, ParseError, StepSizeTooSmall,
                     SubproblemNotConverged, UnknownProblem)
from .problem import FeasibleSet, MultiObjectiveProblem, Objective, evaluate, jacobian, make_problem
from .rules import Grippo, Metropolis, Monotone, ZhangHager
from .solver import RunResult, SolverConfig, preset_solver, run
from .subproblem import ShiftedBox, solve_direction
