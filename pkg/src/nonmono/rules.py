"""Nonmonotonicity rules: how much each objective may rise in a line search.

A rule is an immutable description (``Monotone()``, ``ZhangHager()``,
``Metropolis()``, ``Grippo()``). Calling ``rule.init(F0)`` produces the
mutable per-run state, which exposes

``relaxation(k, ell, F_k, F_trial)``
    the allowance vector ``nu`` (componentwise >= 0) for backtrack ``ell``
    of iteration ``k``;
``accept(k, F_next)``
    bookkeeping once a step has been accepted.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInput


def default_eta(k: int) -> float:
    return 0.85 / (k + 1)


# ------------------------------------------------------------------ monotone

@dataclass(frozen=True)
class Monotone:
    name = "monotone"

    def init(self, F0) -> "MonotoneState":
        return MonotoneState(np.asarray(F0, dtype=float).size)


class MonotoneState:
    def __init__(self, m):
        self.m = m
        self.k = 0

    def relaxation(self, k, ell, F_k, F_trial):
        return np.zeros(self.m)

    def accept(self, k, F_next):
        self.k += 1


# ------------------------------------------------------------------ Zhang-Hager

@dataclass(frozen=True)
class ZhangHager:
    """Weighted-average reference values ``C_k``; ``nu_k = C_k - F(x_k)``.

    ``eta`` maps the iteration index to the averaging weight and must stay in
    ``[0, eta_max]`` with ``eta_max < 1``.
    """

    eta: Callable[[int], float] = default_eta
    eta_max: float = 0.85
    name = "zh"

    def __post_init__(self):
        if not 0.0 <= self.eta_max < 1.0:
            raise InvalidInput("eta_max must lie in [0, 1)")

    @property
    def delta_min(self) -> float:
        return 1.0 - self.eta_max

    def init(self, F0) -> "ZhangHagerState":
        return ZhangHagerState(self, np.array(F0, dtype=float))


class ZhangHagerState:
    def __init__(self, rule: ZhangHager, F0: np.ndarray):
        self.rule = rule
        self.k = 0
        self.Q = 1.0
        self.F = F0.copy()
        self.nu = np.zeros_like(F0)

    @property
    def C(self) -> np.ndarray:
        return self.F + self.nu

    def relaxation(self, k, ell, F_k, F_trial):
        return self.nu.copy()

    def accept(self, k, F_next):
        eta = float(self.rule.eta(k))
        if not 0.0 <= eta <= self.rule.eta_max:
            raise InvalidInput(f"eta_{k} = {eta} outside [0, {self.rule.eta_max}]")
        F_next = np.asarray(F_next, dtype=float)
        Q_next = eta * self.Q + 1.0
        # nu_{k+1} = (1 - 1/Q_{k+1}) (F_k + nu_k - F_{k+1}); evaluated on the
        # differences so the result does not inherit roundoff from |F|; an
        # admissible F_next makes the bracket >= 0 up to one rounding
        self.nu = (eta * self.Q / Q_next) * np.maximum((self.F - F_next) + self.nu, 0.0)
        self.Q = Q_next
        self.F = F_next.copy()
        self.k += 1


# ------------------------------------------------------------------ Metropolis

@dataclass(frozen=True)
class Metropolis:
    """``nu_i = sigma_i exp(-max(gamma, f_i(trial) - f_i(x_k)) / tau_k)``.

    ``sigma=None`` resolves to ``|F(x_0)|`` at initialization. ``tau=None``
    selects ``tau_k = 1/ln(k+1)``, for which the allowance is evaluated as
    ``sigma_i / (k+1)^max(gamma, increase)``; at ``k = 0`` that gives the
    ``tau -> inf`` limit ``sigma``.
    """

    sigma: Optional[tuple] = None
    gamma: float = 8.0
    tau: Optional[Callable[[int], float]] = None
    name = "metropolis"

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidInput("gamma must be positive")
        if self.sigma is not None:
            sig = tuple(float(v) for v in np.atleast_1d(self.sigma))
            if any(v < 0 or not math.isfinite(v) for v in sig):
                raise InvalidInput("sigma must be finite and nonnegative")
            object.__setattr__(self, "sigma", sig)

    def init(self, F0) -> "MetropolisState":
        F0 = np.asarray(F0, dtype=float)
        sigma = np.abs(F0) if self.sigma is None else np.array(self.sigma, dtype=float)
        if sigma.shape != F0.shape:
            if sigma.size == 1:
                sigma = np.full(F0.shape, sigma.item())
            else:
                raise InvalidInput(f"sigma has {sigma.size} entries for {F0.size} objectives")
        return MetropolisState(self, sigma)


class MetropolisState:
    def __init__(self, rule: Metropolis, sigma: np.ndarray):
        self.rule = rule
        self.sigma = sigma
        self.k = 0

    def relaxation(self, k, ell, F_k, F_trial):
        expo = np.maximum(self.rule.gamma, np.asarray(F_trial) - np.asarray(F_k))
        if self.rule.tau is None:
            if k == 0:
                return self.sigma.copy()
            with np.errstate(over="ignore"):
                return self.sigma / np.power(float(k + 1), expo)
        tau = float(self.rule.tau(k))
        if not tau > 0:
            raise InvalidInput(f"temperature tau_{k} = {tau} must be positive")
        return self.sigma * np.exp(-expo / tau)

    def accept(self, k, F_next):
        self.k += 1


# ------------------------------------------------------------------ Grippo

@dataclass(frozen=True)
class Grippo:
    """Max-type rule: ``nu_i = max_{0<=j<=min(k,M)} f_i(x_{k-j}) - f_i(x_k)``."""

    M: int = 10
    name = "grippo"

    def __post_init__(self):
        if self.M < 0:
            raise InvalidInput("window size M must be >= 0")

    def init(self, F0) -> "GrippoState":
        return GrippoState(self, np.array(F0, dtype=float))


class GrippoState:
    def __init__(self, rule: Grippo, F0: np.ndarray):
        self.rule = rule
        self.window = deque([F0], maxlen=rule.M + 1)
        self.k = 0

    def relaxation(self, k, ell, F_k, F_trial):
        return np.max(np.stack(self.window), axis=0) - np.asarray(F_k, dtype=float)

    def accept(self, k, F_next):
        self.window.append(np.array(F_next, dtype=float))
        self.k += 1


RULES = {"monotone": Monotone, "zh": ZhangHager, "metropolis": Metropolis, "grippo": Grippo}


def rule_init(kind, F0):
    return kind.init(F0)


def parse_rule(text: str):
    """Build a rule from ``name[:key=value,...]``.

    Examples: ``monotone``, ``zh:eta=0.85``, ``metropolis:gamma=8,sigma=auto``,
    ``grippo:M=5``. For ``zh`` a numeric ``eta`` is the constant ``c`` of the
    schedule ``eta_k = c/(k+1)``.
    """
    name, _, params = text.partition(":")
    name = name.strip().lower()
    if name in ("zhang_hager", "zhang-hager"):
        name = "zh"
    if name not in RULES:
        raise InvalidInput(f"unknown rule {name!r}; choose from {', '.join(RULES)}")
    kw = {}
    for item in filter(None, (p.strip() for p in params.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise InvalidInput(f"rule parameter {item!r} is not key=value")
        kw[key.strip()] = value.strip()
    try:
        if name == "monotone":
            if kw:
                raise InvalidInput("monotone takes no parameters")
            return Monotone()
        if name == "zh":
            c = float(kw.pop("eta", 0.85))
            if kw:
                raise InvalidInput(f"unknown zh parameters {sorted(kw)}")
            return ZhangHager(eta=_EtaSchedule(c), eta_max=c)
        if name == "metropolis":
            sigma = kw.pop("sigma", "auto")
            gamma = float(kw.pop("gamma", 8.0))
            if kw:
                raise InvalidInput(f"unknown metropolis parameters {sorted(kw)}")
            sig = None if sigma == "auto" else tuple(float(v) for v in sigma.split(";"))
            return Metropolis(sigma=sig, gamma=gamma)
        M = int(kw.pop("M", kw.pop("m", 10)))
        if kw:
            raise InvalidInput(f"unknown grippo parameters {sorted(kw)}")
        return Grippo(M=M)
    except ValueError as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"bad rule specification {text!r}: {exc}") from exc


@dataclass(frozen=True)
class _EtaSchedule:
    c: float = 0.85

    def __call__(self, k: int) -> float:
        return self.c / (k + 1)
