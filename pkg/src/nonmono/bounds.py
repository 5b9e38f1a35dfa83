"""Worst-case iteration bounds for the nonmonotone method.

Given Hölder data ``(theta_i, H_i)`` for the objective gradients and lower
bounds ``f_i*``, the accepted step sizes satisfy ``alpha_k >= kappa1`` (when
``theta_min = 1``) and the method reaches ``||s(x_k)|| <= eps`` within

    T = ceil( min_i max{ C_i(kappa2/2 * eps^p), 2 (f_i(x0) - f_i*) / kappa2 * eps^-p } ),

with ``p = 1 + 1/theta_min`` and ``kappa2 = c1 rho kappa1``. ``C_i`` depends
on how fast the allowances ``nu_k`` average out, so each nonmonotonicity rule
comes with its own ``C_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rules as _rules
from .errors import InvalidInput


@dataclass(frozen=True)
class SmoothnessModel:
    theta: tuple
    H: tuple
    f_star: tuple

    def __post_init__(self):
        th = tuple(float(v) for v in np.atleast_1d(self.theta))
        H = tuple(float(v) for v in np.atleast_1d(self.H))
        fs = tuple(float(v) for v in np.atleast_1d(self.f_star))
        if not len(th) == len(H) == len(fs) or not th:
            raise InvalidInput("theta, H and f_star need one entry per objective")
        if any(not 0 < t <= 1 for t in th):
            raise InvalidInput("Hölder exponents must lie in (0, 1]")
        if any(not (h > 0 and math.isfinite(h)) for h in H):
            raise InvalidInput("Hölder constants must be positive and finite")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "f_star", fs)

    @property
    def m(self) -> int:
        return len(self.theta)

    @property
    def theta_min(self) -> float:
        return min(self.theta)


def theta_min(model: SmoothnessModel) -> float:
    return model.theta_min


@dataclass(frozen=True)
class RuleComplexityModel:
    """``C(delta)``: per-objective count after which the running mean of
    ``nu_k`` stays below ``delta``."""

    kind: str
    C: Callable[[float], np.ndarray]
    note: str = ""


def monotone_complexity(m: int) -> RuleComplexityModel:
    return RuleComplexityModel("monotone", lambda delta: np.ones(m), "C_i = 1")


def zhang_hager_complexity(delta_min: float, F0, f_star) -> RuleComplexityModel:
    if not 0 < delta_min < 1:
        raise InvalidInput("delta_min must lie in (0, 1)")
    gap = np.asarray(F0, dtype=float) - np.asarray(f_star, dtype=float)
    if np.any(gap < 0):
        raise InvalidInput("f(x0) is below the stated lower bound f*")
    factor = (1 - delta_min) / delta_min

    def C(delta):
        return factor * gap / _positive(delta)

    return RuleComplexityModel("zh", C, "C_i = (1-dmin)/dmin (f_i(x0)-f_i*) / delta")


def metropolis_complexity(sigma, gamma: float) -> RuleComplexityModel:
    """Complexity witness for the log-cooled Metropolis allowance.

    For ``gamma > 1`` the allowances are summable and
    ``C_i = sigma_i gamma/(gamma-1) / delta``. Otherwise the allowances only
    vanish; with ``nu <= sigma`` and ``nu_k <= delta/2`` from
    ``k >= xi = ceil((2 sigma/delta)^(1/gamma))`` one gets
    ``C_i = max(2 xi sigma/delta, 1 + xi)``.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0) or not gamma > 0:
        raise InvalidInput("need sigma >= 0 and gamma > 0")
    if gamma > 1:
        def C(delta):
            return sigma * gamma / (gamma - 1) / _positive(delta)
        return RuleComplexityModel("metropolis", C, "C_i = sigma_i gamma/(gamma-1) / delta")

    def C(delta):
        delta = _positive(delta)
        xi = np.maximum(np.ceil((2 * sigma / delta) ** (1.0 / gamma)), 1.0)
        return np.maximum(2 * xi * sigma / delta, 1 + xi)

    return RuleComplexityModel("metropolis", C, "C_i = max(2 xi sigma_i/delta, 1 + xi)")


def complexity_model(rule, F0, model: SmoothnessModel) -> RuleComplexityModel:
    """The complexity witness matching a rule from :mod:`nonmono.rules`."""
    F0 = np.asarray(F0, dtype=float)
    if isinstance(rule, _rules.Monotone):
        return monotone_complexity(F0.size)
    if isinstance(rule, _rules.ZhangHager):
        return zhang_hager_complexity(rule.delta_min, F0, model.f_star)
    if isinstance(rule, _rules.Metropolis):
        if rule.tau is not None:
            raise InvalidInput("bounds are available only for the tau_k = 1/ln(k+1) schedule")
        sigma = np.abs(F0) if rule.sigma is None else np.broadcast_to(
            np.asarray(rule.sigma, dtype=float), F0.shape)
        return metropolis_complexity(sigma, rule.gamma)
    raise InvalidInput(f"no complexity bound is known for rule {getattr(rule, 'name', rule)!r}")


def _positive(delta) -> float:
    delta = float(delta)
    if not delta > 0:
        raise InvalidInput("delta must be positive")
    return delta


def kappa1(model: SmoothnessModel, c1=1.0, c2=1.0, rho=1e-4, beta=0.5) -> float:
    """Lower bound on accepted step sizes (for ``theta_min = 1``)."""
    vals = [beta * ((1 + t) * c1 * (1 - rho) / (c2 ** (1 + t) * h)) ** (1.0 / t)
            for t, h in zip(model.theta, model.H)]
    return min(1.0, min(vals))


def kappa2(model: SmoothnessModel, c1=1.0, c2=1.0, rho=1e-4, beta=0.5) -> float:
    return c1 * rho * kappa1(model, c1, c2, rho, beta)


@dataclass(frozen=True)
class BoundReport:
    kappa1: float
    kappa2: float
    theta_min: float
    delta: float
    C: np.ndarray
    decrease_terms: np.ndarray
    T_max: int


def bound_report(model: SmoothnessModel, rule_model: RuleComplexityModel, F0, eps,
                 c1=1.0, c2=1.0, rho=1e-4, beta=0.5) -> BoundReport:
    eps = float(eps)
    if not 0 < eps < 1:
        raise InvalidInput(f"eps must lie in (0, 1), got {eps}")
    F0 = np.asarray(F0, dtype=float)
    if F0.size != model.m:
        raise InvalidInput(f"F0 has {F0.size} entries, model has {model.m}")
    k1 = kappa1(model, c1, c2, rho, beta)
    k2 = c1 * rho * k1
    tm = model.theta_min
    ep = eps ** (1 + 1 / tm)
    delta = 0.5 * k2 * ep
    C = np.asarray(rule_model.C(delta), dtype=float)
    decrease = 2 * (F0 - np.asarray(model.f_star)) / (k2 * ep)
    T = float(np.min(np.maximum(C, decrease)))
    return BoundReport(k1, k2, tm, delta, C, decrease, int(math.ceil(T)))


def iteration_bound(model: SmoothnessModel, rule_model: RuleComplexityModel, c1, c2, rho, beta,
                    F0, eps) -> int:
    """Worst-case number of iterations to reach ``||s|| <= eps``."""
    return bound_report(model, rule_model, F0, eps, c1, c2, rho, beta).T_max


def metropolis_decay_envelope(sigma_i, gamma, k) -> float:
    """``sigma / (k+1)^gamma``, which dominates the log-cooled Metropolis allowance."""
    if k < 0:
        raise InvalidInput("k must be nonnegative")
    return float(sigma_i) / float(k + 1) ** float(gamma)
