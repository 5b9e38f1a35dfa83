import csv
import io
import warnings

import numpy as np
import pytest

from conftest import quadratic, quadratic_suite
from nonmono.errors import InvalidInput, StepSizeTooSmall
from nonmono.problem import FeasibleSet, Objective, contains, make_problem
from nonmono.rules import Metropolis, Monotone, ZhangHager
from nonmono.solver import (CONVERGED, MAX_ITERATIONS, SolverConfig, direction, line_search,
                            preset_solver, run, trajectory_csv, trajectory_header)
from nonmono.testsuite import build_benchmark, standard_start_grid


def half_square(n=1):
    return quadratic(np.eye(n), np.zeros(n), name="half_sq")


def test_line_search_full_step():
    prob = make_problem("p", [half_square()], FeasibleSet.whole_space(1))
    x, d = np.array([1.0]), np.array([-1.0])
    F, J = np.array([0.5]), np.array([[1.0]])
    res = line_search(prob, x, F, J, d, Monotone().init(F), 0, SolverConfig())
    assert res.ell == 0 and res.alpha == 1.0
    assert res.F_next[0] == 0.0


def test_line_search_backtracks_scaled_direction():
    prob = make_problem("p", [half_square()], FeasibleSet.whole_space(1))
    x, d = np.array([1.0]), np.array([-3.0])
    F, J = np.array([0.5]), np.array([[1.0]])
    cfg = SolverConfig(rho=0.9, beta=0.5)
    res = line_search(prob, x, F, J, d, Monotone().init(F), 0, cfg)
    # direct evaluation of the trial sequence: 0.5 (1 - 3a)^2 <= 0.5 - 2.7 a
    # reduces to a <= 1/15, first met at a = 1/16
    trials = [(a, 0.5 * (1 - 3 * a) ** 2, 0.5 - 0.9 * a * 3) for a in 0.5 ** np.arange(5)]
    assert [t[1] <= t[2] for t in trials] == [False, False, False, False, True]
    assert res.ell == 4 and res.alpha == 0.0625
    assert res.F_next[0] == pytest.approx(0.5 * 0.8125 ** 2)


def test_line_search_alpha_is_repeated_product():
    prob = make_problem("p", [half_square()], FeasibleSet.whole_space(1))
    F, J = np.array([0.5]), np.array([[1.0]])
    cfg = SolverConfig(rho=0.9, beta=0.3)
    res = line_search(prob, np.array([1.0]), F, J, np.array([-50.0]), Monotone().init(F), 0, cfg)
    a = 1.0
    for _ in range(res.ell):
        a *= 0.3
    assert res.alpha == a


def test_line_search_metropolis_accepts_increase():
    """f_2 increases, f_1 decreases; the allowance admits the step."""
    o1 = quadratic(np.eye(2), [0.0, 0.0], name="a")
    o2 = Objective("b", lambda x: float(x[0] + 0.1 * x[1] ** 2), lambda x: np.array([1.0, 0.2 * x[1]]))
    prob = make_problem("p", [o1, o2], FeasibleSet.whole_space(2))
    x = np.array([0.0, 1.0])
    F = np.array([0.5, 0.1])
    J = np.array([[0.0, 1.0], [1.0, 0.2]])
    d = np.array([0.3, -1.0])            # slope_2 = 0.3 - 0.2 > 0, so f_2 rises
    state = Metropolis(sigma=(1.0, 1.0), gamma=8).init(F)
    res = line_search(prob, x, F, J, d, state, 0, SolverConfig(mk_schedule=0))
    xt = x + d
    Ft = np.array([o1.f(xt), o2.f(xt)])
    armijo = F + 1e-4 * (J @ d)
    assert Ft[1] > armijo[1] and Ft[1] > F[1]            # plain Armijo fails for f_2
    assert np.all(Ft <= armijo + res.nu)                # relaxed condition holds
    assert res.ell == 0 and res.armijo_count == 1
    np.testing.assert_allclose(res.F_next, Ft)
    # the monotone rule rejects the same full step
    res_m = line_search(prob, x, F, J, d, Monotone().init(F), 0, SolverConfig())
    assert res_m.ell > 0


def test_line_search_cardinality_blocks_step():
    o1 = quadratic(np.eye(2), [0.0, 0.0], name="a")
    o2 = Objective("b", lambda x: float(x[0] + 0.1 * x[1] ** 2), lambda x: np.array([1.0, 0.2 * x[1]]))
    prob = make_problem("p", [o1, o2], FeasibleSet.whole_space(2))
    x, F = np.array([0.0, 1.0]), np.array([0.5, 0.1])
    J = np.array([[0.0, 1.0], [1.0, 0.2]])
    d = np.array([0.3, -1.0])
    state = Metropolis(sigma=(1.0, 1.0), gamma=8).init(F)
    with pytest.raises(StepSizeTooSmall):
        # f_2 has a positive slope, so both objectives can never decrease
        line_search(prob, x, F, J, d, state, 0, SolverConfig(mk_schedule="all", max_backtracks=20))


def test_direction_single_objective_is_steepest_descent(rng):
    A = np.diag([1.0, 3.0, 0.5])
    prob = make_problem("p", [quadratic(A, [1.0, -1.0, 2.0])], FeasibleSet.whole_space(3))
    x = rng.normal(size=3)
    sol = direction(prob, x, SolverConfig())
    g = A @ (x - np.array([1.0, -1.0, 2.0]))
    np.testing.assert_allclose(sol.s, -g, rtol=1e-10, atol=1e-12)
    assert sol.max_slope == pytest.approx(-sol.s @ sol.s, rel=1e-10)


def test_run_stops_at_critical_point():
    o1 = quadratic(np.eye(2), [1.0, 0.0], name="a")
    o2 = quadratic(np.eye(2), [-1.0, 0.0], name="b")
    prob = make_problem("p", [o1, o2], FeasibleSet.whole_space(2))
    res = run(prob, [0.0, 0.0], Monotone())
    assert res.status == CONVERGED and res.iterations == 0
    assert res.final_crit <= 1e-12


def test_run_half_square_converges_in_one_step():
    prob = make_problem("p", [half_square(2)], FeasibleSet.whole_space(2))
    res = run(prob, [1.0, 1.0], Monotone())
    assert res.status == CONVERGED
    assert res.iterations <= 2
    assert res.final_crit == 0.0
    np.testing.assert_array_equal(res.final_x, [0.0, 0.0])


def _check_run_invariants(res, prob, cfg, x0_F):
    mk = cfg.mk(prob.m)
    recs = res.records
    assert recs[-1].alpha is None
    for r in recs:
        assert contains(prob.feasible_set, r.x, 1e-9)
    steps = [r for r in recs if r.alpha is not None]
    for r, nxt in zip(steps, recs[1:]):
        assert r.ell <= cfg.max_backtracks
        assert np.all(r.nu >= 0)
        a = 1.0
        for _ in range(r.ell):
            a *= cfg.beta
        assert r.alpha == a
        # condition (12) re-verified from the records
        bound = r.F + cfg.rho * r.alpha * r.slopes + r.nu
        assert np.all(nxt.F <= bound + 1e-12)
        # condition (11)
        plain = np.count_nonzero(nxt.F <= r.F + cfg.rho * r.alpha * r.slopes)
        assert plain >= mk and r.armijo_count >= mk
    if steps:
        lhs = sum(cfg.rho * r.alpha * (-r.slopes) for r in steps)
        nus = sum(r.nu for r in steps)
        assert np.all(lhs <= x0_F - recs[-1].F + nus + 1e-8)
    if res.status == CONVERGED:
        assert res.final_crit <= cfg.eps


@pytest.mark.parametrize("preset", ["M", "N1", "N2", "Nh"])
def test_quadratic_suite_invariants(preset):
    for prob, x0, _, _ in quadratic_suite():
        rule, cfg = preset_solver(preset)
        res = run(prob, x0, rule, cfg)
        assert res.status == CONVERGED, (prob.name, res.status)
        assert min(r.crit for r in res.records) <= cfg.eps
        _check_run_invariants(res, prob, cfg, res.records[0].F)


def test_full_steps_when_curvature_is_small():
    # with H_i < 2 (1 - rho) the unit step always passes the Armijo test
    for prob, x0, H, _ in quadratic_suite(seed=11, hi=1.9):
        assert max(H) < 2 * (1 - 1e-4)
        res = run(prob, x0, *preset_solver("M"))
        assert res.status == CONVERGED
        assert all(r.ell == 0 for r in res.records if r.alpha is not None)


def test_monotone_all_is_strictly_decreasing():
    for prob, x0, _, _ in quadratic_suite(seed=3, count=5):
        res = run(prob, x0, Monotone(), SolverConfig(mk_schedule="all"))
        Fs = np.array([r.F for r in res.records])
        assert np.all(np.diff(Fs, axis=0) < 0)


def test_preset_M_strict_decrease_on_benchmark():
    prob = build_benchmark("discrete_integral_equation")
    for idx in (0, 13, 55, 80):
        res = run(prob, standard_start_grid()[idx], *preset_solver("M"))
        Fs = np.array([r.F for r in res.records])
        assert np.all(np.diff(Fs, axis=0) < 0)


@pytest.mark.parametrize("idx", [0, 7, 40, 62, 80])
def test_benchmark_runs_N2(idx):
    prob = build_benchmark("extended_rosenbrock")
    rule, cfg = preset_solver("N2")
    res = run(prob, standard_start_grid()[idx], rule, cfg)
    assert res.status in (CONVERGED, MAX_ITERATIONS)
    assert res.iterations <= 1000
    _check_run_invariants(res, prob, cfg, res.records[0].F)


def test_presets():
    rule, cfg = preset_solver("M")
    assert isinstance(rule, Monotone) and cfg.mk(2) == 0
    rule, cfg = preset_solver("N1")
    assert isinstance(rule, ZhangHager) and rule.eta(3) == pytest.approx(0.85 / 4)
    rule, cfg = preset_solver("N2")
    assert isinstance(rule, Metropolis) and rule.gamma == 8 and rule.sigma is None
    assert rule.tau is None
    st = rule.init(np.array([-3.0, 2.0]))
    np.testing.assert_array_equal(st.sigma, [3.0, 2.0])
    rule, cfg = preset_solver("Nh")
    assert cfg.mk(2) == 1 and cfg.mk(3) == 2
    for name in ("M", "N1", "N2", "Nh"):
        _, cfg = preset_solver(name)
        assert (cfg.rho, cfg.beta, cfg.c1, cfg.c2, cfg.eps, cfg.max_iters) == (
            1e-4, 0.5, 1.0, 1.0, 1e-4, 1000)
    rule, _ = preset_solver("Nh", nu_rule=Monotone())
    assert isinstance(rule, Monotone)
    with pytest.raises(InvalidInput):
        preset_solver("N3")
    with pytest.raises(InvalidInput):
        preset_solver("M", nu_rule=Monotone())


def test_config_validation():
    for kw in (dict(rho=0), dict(rho=1), dict(beta=1.5), dict(eps=0), dict(mk_schedule="most"),
               dict(mk_schedule=-1), dict(c1=0)):
        with pytest.raises(InvalidInput):
            SolverConfig(**kw)
    with pytest.raises(InvalidInput):
        SolverConfig(mk_schedule=3).mk(2)


def test_max_iterations_status():
    prob = build_benchmark("discrete_integral_equation")
    res = run(prob, standard_start_grid()[55], Monotone(), SolverConfig(max_iters=3))
    assert res.status == MAX_ITERATIONS and res.iterations == 3
    assert len(res.records) == 4


def test_x0_outside_is_projected():
    prob = build_benchmark("extended_rosenbrock")
    with pytest.warns(UserWarning, match="projected"):
        res = run(prob, [9.0, 0.0, 0.0, -9.0], Monotone(), SolverConfig(max_iters=2))
    np.testing.assert_array_equal(res.records[0].x, [5.12, 0.0, 0.0, -5.12])
    with pytest.raises(InvalidInput):
        run(prob, [0.0, 0.0], Monotone())


def test_trajectory_csv_round_trip():
    prob = build_benchmark("extended_rosenbrock")
    res = run(prob, standard_start_grid()[5], *preset_solver("N1"))
    text = trajectory_csv(res)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == trajectory_header(4, 2)
    assert rows[0][:6] == ["k", "x_1", "x_2", "x_3", "x_4", "f_1"]
    assert len(rows) == len(res.records) + 1
    for rec, row in zip(res.records, rows[1:]):
        vals = dict(zip(rows[0], row))
        assert int(vals["k"]) == rec.k
        np.testing.assert_array_equal([float(vals[f"x_{j}"]) for j in (1, 2, 3, 4)], rec.x)
        np.testing.assert_array_equal([float(vals["f_1"]), float(vals["f_2"])], rec.F)
        assert float(vals["crit"]) == rec.crit
        if rec.alpha is None:
            assert vals["alpha"] == "" and vals["nu_1"] == ""
        else:
            assert float(vals["alpha"]) == rec.alpha
            np.testing.assert_array_equal([float(vals["nu_1"]), float(vals["nu_2"])], rec.nu)


def test_counters_are_cumulative():
    prob = build_benchmark("penalty_1")
    res = run(prob, standard_start_grid()[3], *preset_solver("N2"))
    fe = [r.f_evals for r in res.records]
    assert fe == sorted(fe) and res.f_evals == fe[-1]
    assert res.jacobian_evals == len(res.records)
