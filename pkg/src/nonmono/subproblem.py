"""Multiobjective steepest-descent direction over a shifted box.

The direction at ``x`` is the unique minimizer ``s`` of

    h(d) = max_i g_i^T d + ||d||^2 / 2        over  d in Omega - x,

where ``g_i`` are the objective gradients. Writing the max as a max over the
unit simplex and swapping min and max gives the concave dual

    psi(lam) = min_d  g(lam)^T d + ||d||^2 / 2,     g(lam) = sum_i lam_i g_i,

whose inner minimizer is the componentwise clamp of ``-g(lam)`` to the box.
We maximize ``psi`` by projected gradient ascent on the simplex and stop when
the primal-dual gap ``h(d(lam)) - psi(lam)`` drops below ``tol``. The gap
certifies both the value and the descent inequality
``max_i g_i^T s <= -||s||^2 + gap``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, SubproblemNotConverged

DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True, eq=False)
class ShiftedBox:
    """Bounds of ``Omega - x``. Entries may be infinite."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise InvalidInput("shifted box bounds differ in length")
        if np.any(lo > 0) or np.any(hi < 0):
            raise InvalidInput("shifted box must contain the origin")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unbounded(cls, n: int) -> "ShiftedBox":
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    @classmethod
    def around(cls, fset, x) -> "ShiftedBox":
        """``Omega - x`` for a feasible ``x``.

        Rounding can leave ``x`` an ulp outside the box; the bounds are
        snapped to keep the origin inside.
        """
        lo, hi = fset.shifted(np.asarray(x, dtype=float))
        return cls(np.minimum(lo, 0.0), np.maximum(hi, 0.0))

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def clamp(self, d: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(d, self.lower), self.upper)


@dataclass(frozen=True, eq=False)
class DirectionSolution:
    s: np.ndarray
    lam: np.ndarray
    h_value: float
    xi: float
    gap: float
    inner_iterations: int
    dual: float
    max_slope: float  # max_i g_i^T s

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.s))


def _grads(grads) -> np.ndarray:
    G = np.asarray(grads, dtype=float)
    if G.ndim == 1:
        G = G[None, :]
    if G.ndim != 2:
        raise InvalidInput("gradients must form an m x n array")
    return G


def inner_minimizer(lam, grads, box: ShiftedBox) -> np.ndarray:
    """Minimizer of ``g(lam)^T d + ||d||^2/2`` over the box: clamp of ``-g(lam)``."""
    G = _grads(grads)
    return box.clamp(-(np.asarray(lam, dtype=float) @ G))


def dual_value(lam, grads, box: ShiftedBox) -> float:
    G = _grads(grads)
    g = np.asarray(lam, dtype=float) @ G
    d = box.clamp(-g)
    return float(g @ d + 0.5 * (d @ d))


def primal_value(grads, d) -> float:
    """``h(d) = max_i g_i^T d + ||d||^2 / 2``."""
    G = _grads(grads)
    d = np.asarray(d, dtype=float)
    return float(np.max(G @ d) + 0.5 * (d @ d))


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{lam >= 0, sum(lam) = 1}`` (sort and threshold)."""
    v = np.asarray(v, dtype=float).reshape(-1)
    m = v.size
    if m == 0:
        raise InvalidInput("cannot project an empty vector onto the simplex")
    if m == 1:
        return np.ones(1)
    if m == 2:
        t = min(max(0.5 * (v[0] - v[1] + 1.0), 0.0), 1.0)
        return np.array([t, 1.0 - t])
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, m + 1)
    hits = np.nonzero(u - css / idx > 0)[0]
    # index 0 always qualifies in exact arithmetic; cancellation can hide it
    rho = hits[-1] if hits.size else 0
    theta = css[rho] / (rho + 1.0)
    w = np.maximum(v - theta, 0.0)
    # absorb the rounding residue in the largest weight so the sum is exact
    w[np.argmax(w)] += 1.0 - w.sum()
    return w


def default_tol(grads) -> float:
    G = _grads(grads)
    return 1e-10 * max(1.0, float((G * G).sum(axis=1).max()))


def _solution(G, box, lam, d, Gd, iterations):
    dd = float(d @ d)
    slope = float(np.max(Gd))
    h = slope + 0.5 * dd
    psi = float(lam @ Gd) + 0.5 * dd
    if h > 0.0:
        # d = 0 is always feasible with h(0) = 0, a better primal point
        d, slope, h = np.zeros_like(d), 0.0, 0.0
    return DirectionSolution(
        s=d, lam=lam, h_value=h, xi=h, gap=max(h - psi, 0.0),
        inner_iterations=iterations, dual=psi, max_slope=slope,
    )


def _pattern(G, box, lam):
    """Support of ``lam`` and the unclamped coordinates of ``d(lam)``."""
    g = lam @ G
    free = (-g > box.lower) & (-g < box.upper)
    return np.flatnonzero(lam > 0), free


def _polish(G, box, lam, d, pattern=None):
    """Exact dual solution for the active pattern read off ``(lam, d)``.

    With the support ``S`` of ``lam`` and the clamped coordinates of ``d``
    fixed, optimality reduces to a small linear system: every objective in
    ``S`` has the same slope ``g_i^T d`` and the weights sum to one. Returns
    ``None`` when the pattern gives infeasible weights.
    """
    S, free = pattern if pattern is not None else _pattern(G, box, lam)
    k = S.size
    if k == 1:
        w = np.ones(1)
    else:
        GS = G[S]
        GF = GS[:, free]
        K = np.ones((k + 1, k + 1))
        K[:k, :k] = GF @ GF.T
        K[k, k] = 0.0
        rhs = np.empty(k + 1)
        rhs[:k] = GS[:, ~free] @ d[~free]
        rhs[k] = 1.0
        try:
            w = np.linalg.solve(K, rhs)[:k]
        except np.linalg.LinAlgError:
            w = np.linalg.lstsq(K, rhs, rcond=None)[0][:k]
        if not np.all(np.isfinite(w)) or np.any(w < -1e-12):
            return None
    new = np.zeros_like(lam)
    new[S] = np.maximum(w, 0.0)
    total = new.sum()
    if total <= 0:
        return None
    new /= total
    d_new = box.clamp(-(new @ G))
    Gd = G @ d_new
    return new, d_new, Gd, float(np.max(Gd)) - float(new @ Gd)


def _two_objective(G, box):
    """Exact dual maximizer for two objectives.

    With ``lam = (t, 1-t)`` the dual derivative ``(g1 - g2)^T d(t)`` is
    piecewise linear and nonincreasing in ``t``; its kinks are where a
    coordinate of ``-g(t)`` meets a bound. Locate the sign change among the
    kinks and interpolate linearly inside that piece.
    """
    a = G[0] - G[1]
    b = G[1]

    def slope(t):
        t = np.atleast_1d(t)
        d = np.minimum(np.maximum(-(b + t[:, None] * a), box.lower), box.upper)
        return d @ a

    ends = slope(np.array([0.0, 1.0]))
    if ends[0] <= 0:
        t = 0.0
    elif ends[1] >= 0:
        t = 1.0
    else:
        nz = a != 0
        with np.errstate(divide="ignore", invalid="ignore"):
            kinks = np.concatenate([(-b[nz] - box.lower[nz]) / a[nz],
                                    (-b[nz] - box.upper[nz]) / a[nz]])
        kinks = kinks[np.isfinite(kinks) & (kinks > 0) & (kinks < 1)]
        T = np.concatenate([[0.0], np.unique(kinks), [1.0]])
        vals = slope(T)
        i = int(np.argmax(vals <= 0))
        t0, t1, v0, v1 = T[i - 1], T[i], vals[i - 1], vals[i]
        t = t0 + (t1 - t0) * (v0 / (v0 - v1)) if v0 > v1 else t1
        t = min(max(t, t0), t1)
    return np.array([t, 1.0 - t])


def solve_direction(grads, box: ShiftedBox, tol: float | None = None,
                    max_iter: int = DEFAULT_MAX_ITER, lam0=None,
                    method: str = "auto") -> DirectionSolution:
    """Steepest-descent direction ``s(x)`` with a duality-gap certificate.

    Dual projected gradient ascent with Barzilai-Borwein trial steps and
    backtracking. Each iterate also proposes the exact solution of its
    active pattern (see ``_polish``); a proposal is kept only if it lowers the
    certified gap.

    Parameters
    ----------
    grads : (m, n) array
        Rows are the objective gradients at ``x``.
    box : ShiftedBox
        The shifted feasible set ``Omega - x``.
    tol : float, optional
        Gap tolerance; defaults to ``1e-10 * max(1, max_i ||g_i||^2)``.
    max_iter : int
        Cap on ascent steps.
    lam0 : array, optional
        Starting dual weights (projected onto the simplex); uniform by default.
    method : {"auto", "ascent"}
        ``"auto"`` solves two-objective instances by an exact breakpoint
        search and falls back to ascent if its gap misses ``tol``;
        ``"ascent"`` always iterates.

    Raises
    ------
    SubproblemNotConverged
        If ``max_iter`` ascent steps leave the gap above ``tol``.
    """
    G = _grads(grads)
    m, n = G.shape
    if box.n != n:
        raise InvalidInput(f"box has dimension {box.n}, gradients have {n}")
    if tol is None:
        tol = default_tol(G)

    if m == 1 or not G.any():
        lam = np.zeros(m)
        lam[0] = 1.0
        d = box.clamp(-G[0]) if m == 1 else np.zeros(n)
        return _solution(G, box, lam, d, G @ d, 0)

    if method not in ("auto", "ascent"):
        raise InvalidInput(f"unknown method {method!r}")
    if method == "auto" and m == 2:
        lam = _two_objective(G, box)
        d = box.clamp(-(lam @ G))
        sol = _solution(G, box, lam, d, G @ d, 0)
        if sol.gap <= tol:
            return sol
        lam0 = lam

    lam = np.full(m, 1.0 / m) if lam0 is None else project_simplex(lam0)
    L = float(np.sum(G * G))  # Frobenius bound on the Lipschitz constant of grad psi
    step = 1.0 / L

    d = box.clamp(-(lam @ G))
    Gd = G @ d
    gap = float(np.max(Gd)) - float(lam @ Gd)
    best = (gap, lam, d, Gd)

    it = 0
    tried = set()
    while True:
        pattern = _pattern(G, box, lam)
        key = (pattern[0].tobytes(), pattern[1].tobytes(), (d <= box.lower).tobytes())
        # the same pattern always yields the same proposal
        if key not in tried:
            tried.add(key)
            polished = _polish(G, box, lam, d, pattern)
            if polished is not None and polished[3] < best[0]:
                lam, d, Gd, gap = polished
                best = (gap, lam, d, Gd)
        if best[0] <= tol or it >= max_iter:
            break
        it += 1
        psi = float(lam @ Gd) + 0.5 * float(d @ d)
        # gradient of psi is G d(lam); backtrack on the projected arc
        while True:
            trial = project_simplex(lam + step * Gd)
            diff = trial - lam
            if not diff.any():
                break
            d_t = box.clamp(-(trial @ G))
            Gd_t = G @ d_t
            psi_t = float(trial @ Gd_t) + 0.5 * float(d_t @ d_t)
            dd = float(diff @ diff)
            if psi_t >= psi + float(Gd @ diff) - dd / (2.0 * step):
                break
            # near the optimum psi differences drown in roundoff; the
            # curvature along the step is computed from gradient differences
            if float((Gd - Gd_t) @ diff) <= dd / step:
                break
            step *= 0.5
        if not diff.any():
            # fixed point of the projected-gradient map: lam is dual optimal
            break
        # Barzilai-Borwein proposal for the next trial step
        curv = float(diff @ (Gd - Gd_t))
        step = max(dd / curv if curv > 0 else 2.0 * step, 1.0 / L)

        lam, d, Gd = trial, d_t, Gd_t
        gap = float(np.max(Gd)) - float(lam @ Gd)
        if gap < best[0]:
            best = (gap, lam, d, Gd)

    sol = _solution(G, box, best[1], best[2], best[3], it)
    if sol.gap > tol:
        raise SubproblemNotConverged(
            f"dual ascent stopped after {it} iterations with gap {sol.gap:.3e} > tol {tol:.3e}",
            solution=sol, gap=sol.gap,
        )
    return sol


def criticality(sol: DirectionSolution) -> float:
    """Pareto criticality measure ``||s(x)||``."""
    return sol.norm


def brute_force_direction(grads, box: ShiftedBox, resolution: int = 801, chunk: int = 1 << 20):
    """Minimize ``h`` over a uniform grid on the box (independent oracle).

    For an unbounded box the cube ``[-G, G]^n`` with ``G = max_i ||g_i||`` is
    used, which contains the minimizer because ``||s|| <= max_i ||g_i||``.
    Returns ``(d, value)`` for the best grid point.
    """
    G = _grads(grads)
    m, n = G.shape
    if resolution < 2:
        raise InvalidInput("grid resolution must be at least 2")
    if n > 3:
        raise InvalidInput("brute-force search is limited to n <= 3")
    lo, hi = box.lower.copy(), box.upper.copy()
    radius = float(np.max(np.linalg.norm(G, axis=1)))
    lo[~np.isfinite(lo)] = -radius
    hi[~np.isfinite(hi)] = radius
    axes = [np.linspace(lo[j], hi[j], resolution) for j in range(n)]

    best_val, best_d = np.inf, None
    total = resolution ** n
    # enumerate grid points in flat-index chunks to bound memory
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        idx = np.unravel_index(flat, (resolution,) * n)
        P = np.stack([axes[j][idx[j]] for j in range(n)], axis=1)
        vals = np.max(P @ G.T, axis=1) + 0.5 * np.einsum("ij,ij->i", P, P)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_d = float(vals[k]), P[k].copy()
    return best_d, best_val


def grid_spacing(grads, box: ShiftedBox, resolution: int = 801) -> np.ndarray:
    G = _grads(grads)
    radius = float(np.max(np.linalg.norm(G, axis=1)))
    lo = np.where(np.isfinite(box.lower), box.lower, -radius)
    hi = np.where(np.isfinite(box.upper), box.upper, radius)
    return (hi - lo) / (resolution - 1)
