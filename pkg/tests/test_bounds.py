import math

import numpy as np
import pytest

from conftest import quadratic_suite
from nonmono.bounds import (SmoothnessModel, bound_report, complexity_model, iteration_bound,
                            kappa1, kappa2, metropolis_complexity, metropolis_decay_envelope,
                            monotone_complexity, zhang_hager_complexity)
from nonmono.errors import InvalidInput
from nonmono.rules import Grippo, Metropolis, Monotone, ZhangHager
from nonmono.solver import preset_solver, run

ARGS = dict(c1=1.0, c2=1.0, rho=1e-4, beta=0.5)


def test_kappa1_examples():
    one = SmoothnessModel([1.0], [1.0], [0.0])
    assert kappa1(one, **ARGS) == pytest.approx(0.9999, rel=1e-15)
    tiny = SmoothnessModel([1.0], [1e-9], [0.0])
    assert kappa1(tiny, 1, 1, 1e-4, 0.999) == 1.0
    two = SmoothnessModel([1.0, 1.0], [1.0, 100.0], [0.0, 0.0])
    assert kappa1(two, **ARGS) == pytest.approx(0.5 * 2 * (1 - 1e-4) / 100, rel=1e-15)
    # Hölder branch: beta * ((1+t) c1 (1-rho) / (c2^(1+t) H))^(1/t)
    half = SmoothnessModel([0.5], [3.0], [0.0])
    assert kappa1(half, 1, 2, 1e-4, 0.5) == pytest.approx(
        0.5 * (1.5 * (1 - 1e-4) / (2 ** 1.5 * 3.0)) ** 2, rel=1e-14)


def test_kappa2_is_exact_product():
    m = SmoothnessModel([1.0, 0.7], [2.0, 5.0], [0.0, 0.0])
    for c1 in (0.5, 1.0, 3.0):
        assert kappa2(m, c1, 1.0, 1e-3, 0.5) == c1 * 1e-3 * kappa1(m, c1, 1.0, 1e-3, 0.5)


def test_monotone_quadratic_example():
    model = SmoothnessModel([1.0], [1.0], [0.0])
    rep = bound_report(model, monotone_complexity(1), [0.5], 1e-2, **ARGS)
    assert rep.kappa2 == pytest.approx(9.999e-5, rel=1e-14)
    assert rep.T_max == math.ceil(2 * 0.5 / (1e-4 * 0.9999) * 1e4)
    assert rep.T_max == pytest.approx(1.0001e8, rel=1e-4)
    assert iteration_bound(model, monotone_complexity(1), 1, 1, 1e-4, 0.5, [0.5], 1e-2) == rep.T_max


def test_metropolis_gamma_gt_one():
    rm = metropolis_complexity([2.0, 3.0], 8.0)
    np.testing.assert_allclose(rm.C(0.1), [8 * 2 / 7 / 0.1, 8 * 3 / 7 / 0.1], rtol=1e-15)
    model = SmoothnessModel([1.0, 1.0], [1.0, 2.0], [0.0, 0.0])
    rep = bound_report(model, rm, [2.0, 3.0], 0.1, **ARGS)
    k2 = 1e-4 * kappa1(model, **ARGS)
    delta = 0.5 * k2 * 0.1 ** 2
    C = np.array([16 / 7, 24 / 7]) / delta
    dec = 2 * np.array([2.0, 3.0]) / (k2 * 0.1 ** 2)
    assert rep.T_max == math.ceil(np.min(np.maximum(C, dec)))


def test_metropolis_gamma_le_one_xi_branch():
    sigma, gamma, delta = 1.5, 0.5, 1e-3
    C = metropolis_complexity([sigma], gamma).C(delta)[0]
    xi = math.ceil((2 * sigma / delta) ** (1 / gamma))
    assert C == max(2 * xi * sigma / delta, 1 + xi)
    # the witness index really works: nu_k <= sigma/(k+1)^gamma <= delta/2 beyond xi
    assert metropolis_decay_envelope(sigma, gamma, xi) <= delta / 2


def test_zhang_hager_witness():
    rm = zhang_hager_complexity(0.15, [3.0, 5.0], [1.0, 0.0])
    np.testing.assert_allclose(rm.C(0.2), [0.85 / 0.15 * 2 / 0.2, 0.85 / 0.15 * 5 / 0.2])
    with pytest.raises(InvalidInput):
        zhang_hager_complexity(0.15, [0.0], [1.0])


def test_C_nonincreasing_in_delta():
    deltas = np.geomspace(1e-8, 1.0, 40)
    for rm in (monotone_complexity(2), zhang_hager_complexity(0.15, [3, 4], [0, 0]),
               metropolis_complexity([1.0, 2.0], 8.0), metropolis_complexity([1.0, 2.0], 0.7)):
        vals = np.array([rm.C(d) for d in deltas])
        assert np.all(np.diff(vals, axis=0) <= 0)


def test_eps_scaling_and_monotonicity():
    model = SmoothnessModel([1.0, 1.0], [1.0, 4.0], [0.0, 0.0])
    F0 = [2.0, 3.0]
    rm = monotone_complexity(2)
    eps = np.geomspace(1e-4, 0.99, 60)
    T = [bound_report(model, rm, F0, e, **ARGS).T_max for e in eps]
    assert all(a >= b for a, b in zip(T, T[1:]))
    # theta_min = 1: the bound scales as eps^-2
    r = bound_report(model, rm, F0, 1e-3, **ARGS).T_max / bound_report(model, rm, F0, 1e-2, **ARGS).T_max
    assert r == pytest.approx(100.0, rel=1e-6)
    # a Hölder exponent of 1/2 gives eps^-3
    hm = SmoothnessModel([1.0, 0.5], [1.0, 4.0], [0.0, 0.0])
    r = bound_report(hm, rm, F0, 1e-3, **ARGS).T_max / bound_report(hm, rm, F0, 1e-2, **ARGS).T_max
    assert r == pytest.approx(1000.0, rel=1e-6)


def test_invalid_inputs():
    model = SmoothnessModel([1.0], [1.0], [0.0])
    for eps in (0.0, 1.0, 1.5, -1e-3):
        with pytest.raises(InvalidInput):
            bound_report(model, monotone_complexity(1), [1.0], eps)
    for bad in (dict(theta=[0.0], H=[1.0], f_star=[0.0]), dict(theta=[1.2], H=[1.0], f_star=[0.0]),
                dict(theta=[1.0], H=[0.0], f_star=[0.0]), dict(theta=[1.0, 1.0], H=[1.0], f_star=[0.0])):
        with pytest.raises(InvalidInput):
            SmoothnessModel(**bad)
    with pytest.raises(InvalidInput):
        complexity_model(Grippo(), [1.0], model)
    with pytest.raises(InvalidInput):
        complexity_model(Metropolis(tau=lambda k: 1.0), [1.0], model)
    with pytest.raises(InvalidInput):
        metropolis_decay_envelope(1.0, 8, -1)


def test_complexity_model_dispatch():
    model = SmoothnessModel([1.0, 1.0], [1.0, 1.0], [0.0, 0.0])
    assert complexity_model(Monotone(), [1, 2], model).kind == "monotone"
    assert complexity_model(ZhangHager(), [1, 2], model).kind == "zh"
    rm = complexity_model(Metropolis(), [-2.0, 4.0], model)
    np.testing.assert_allclose(rm.C(1.0), [2 * 8 / 7, 4 * 8 / 7])


def test_decay_envelope_examples():
    assert metropolis_decay_envelope(1.0, 8, 0) == 1.0
    assert metropolis_decay_envelope(1.0, 8, 1) == 2.0 ** -8


def test_envelope_dominates_fuzzed_runs():
    for prob, x0, _, _ in quadratic_suite(seed=21, count=6):
        rule, cfg = preset_solver("N2")
        res = run(prob, x0 * 3, rule, cfg)
        sigma = np.abs(res.records[0].F)
        for r in res.records:
            if r.nu is not None and r.k >= 1:
                env = [metropolis_decay_envelope(s, 8, r.k) for s in sigma]
                assert np.all(r.nu <= np.array(env) + 1e-15)


@pytest.mark.parametrize("eps", [1e-1, 1e-2])
def test_bound_validity_on_quadratics(eps):
    for prob, x0, H, fs in quadratic_suite():
        model = SmoothnessModel([1.0, 1.0], H, fs)
        rule, cfg = preset_solver("M", eps=eps)
        res = run(prob, x0, rule, cfg)
        assert res.converged
        T = bound_report(model, complexity_model(rule, res.records[0].F, model),
                         res.records[0].F, eps, **ARGS).T_max
        assert res.iterations <= T
        k1 = kappa1(model, **ARGS)
        assert all(r.alpha >= k1 - 1e-12 for r in res.records if r.alpha is not None)
