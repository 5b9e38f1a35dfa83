import numpy as np
import pytest

from nonmono.problem import FeasibleSet, Objective, make_problem


def quadratic(A, c, e=0.0, name="quad"):
    """``f(x) = (x-c)^T A (x-c) / 2 + e`` with its exact gradient."""
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float)

    def f(x):
        r = x - c
        return float(0.5 * r @ A @ r + e)

    def grad(x):
        return A @ (x - c)

    return Objective(name, f, grad)


def random_spd(rng, n, lo=0.5, hi=5.0):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return Q @ np.diag(rng.uniform(lo, hi, n)) @ Q.T


def quadratic_suite(seed=7, count=10, n=3, lo=0.5, hi=5.0):
    """Seeded bi-objective convex quadratics on the whole space.

    Returns ``(problem, x0, H, f_star)`` tuples with ``H_i`` the exact largest
    Hessian eigenvalue and ``f_star`` the exact minima.
    """
    rng = np.random.default_rng(seed)
    out = []
    for j in range(count):
        objs, H, fs = [], [], []
        for i in range(2):
            A = random_spd(rng, n, lo, hi)
            c = rng.uniform(-2, 2, n)
            e = float(rng.uniform(-1, 1))
            objs.append(quadratic(A, c, e, name=f"q{j}_{i}"))
            H.append(float(np.linalg.eigvalsh(A).max()))
            fs.append(e)
        prob = make_problem(f"quad{j}", objs, FeasibleSet.whole_space(n))
        x0 = rng.uniform(-4, 4, n)
        out.append((prob, x0, tuple(H), tuple(fs)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ------------------------------------------------------------------ acceptance report

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def emit(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
