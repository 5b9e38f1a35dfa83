"""Benchmark analytics: dominance, fronts, purity and performance profiles."""
from __future__ import annotations

import csv
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyFront, InvalidInput, ParseError

INF = math.inf


# ------------------------------------------------------------------ dominance

def dominates(Fa, Fb) -> bool:
    """``Fa <= Fb`` everywhere and ``Fa < Fb`` somewhere (exact comparisons)."""
    a = np.asarray(Fa, dtype=float)
    b = np.asarray(Fb, dtype=float)
    if a.shape != b.shape:
        raise InvalidInput(f"cannot compare vectors of shapes {a.shape} and {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


@dataclass(frozen=True, eq=False)
class FrontSet:
    """Nondominated points with provenance.

    ``kept`` indexes the input points that survived; ``witness`` maps each
    removed input index to a kept index that dominates it.
    """

    points: np.ndarray
    provenance: tuple
    kept: tuple
    witness: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.kept)

    def vectors(self) -> set:
        return {tuple(p) for p in self.points}


def _dominance_matrix(P: np.ndarray) -> np.ndarray:
    """``D[a, b]`` is True when point ``a`` dominates point ``b``."""
    le = np.all(P[:, None, :] <= P[None, :, :], axis=2)
    lt = np.any(P[:, None, :] < P[None, :, :], axis=2)
    return le & lt


def nondominated_filter(points, provenance: Sequence | None = None) -> FrontSet:
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None] if P.size else P.reshape(0, 1)
    if P.shape[0] == 0:
        return FrontSet(P.reshape(0, P.shape[1] if P.ndim == 2 else 0), (), ())
    prov = tuple(provenance) if provenance is not None else tuple(range(P.shape[0]))
    if len(prov) != P.shape[0]:
        raise InvalidInput("provenance must have one entry per point")
    D = _dominance_matrix(P)
    dominated = D.any(axis=0)
    kept = np.flatnonzero(~dominated)
    witness = {}
    sums = P.sum(axis=1)
    for b in np.flatnonzero(dominated):
        # the dominator with the smallest coordinate sum cannot itself be
        # dominated (a dominator of it would dominate b with a smaller sum)
        cands = np.flatnonzero(D[:, b])
        witness[int(b)] = int(cands[np.argmin(sums[cands])])
    return FrontSet(P[kept], tuple(prov[i] for i in kept), tuple(int(i) for i in kept), witness)


# ------------------------------------------------------------------ purity

def purity(per_solver_fronts: Mapping[str, object]) -> dict:
    """Reciprocal share of each solver's points in the combined front.

    Values are ``1/t`` with ``t = |PF_s ∩ PF| / |PF|`` computed on distinct
    vectors, or ``inf`` when the solver contributes nothing.
    """
    if not per_solver_fronts:
        raise InvalidInput("purity needs at least one solver")
    own = {}
    for s, pts in per_solver_fronts.items():
        if isinstance(pts, FrontSet):
            own[s] = pts.vectors()
        else:
            arr = np.asarray(pts, dtype=float)
            own[s] = {tuple(p) for p in arr.reshape(len(arr), -1)} if arr.size else set()
    union = sorted(set().union(*own.values()))
    if not union:
        raise EmptyFront("no points in any solver's front")
    ref = nondominated_filter(np.array(union)).vectors()
    out = {}
    for s, vecs in own.items():
        share = len(vecs & ref) / len(ref)
        out[s] = 1.0 / share if share > 0 else INF
    return out


# ------------------------------------------------------------------ profiles

@dataclass(frozen=True, eq=False)
class BenchTable:
    solvers: tuple
    problems: tuple
    t: np.ndarray   # problems x solvers; inf marks a failure

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(len(self.problems), len(self.solvers))
        if np.any(np.isnan(t)) or np.any(t <= 0):
            raise InvalidInput("performance values must be positive (inf for failures)")
        object.__setattr__(self, "solvers", tuple(self.solvers))
        object.__setattr__(self, "problems", tuple(self.problems))
        object.__setattr__(self, "t", t)


@dataclass(frozen=True, eq=False)
class Profile:
    """Step functions ``gamma_s(tau)`` sampled at every breakpoint."""

    solvers: tuple
    taus: np.ndarray            # shared sorted breakpoints, first is 1
    gammas: dict                # solver -> array aligned with taus
    excluded: tuple = ()        # problems where every solver failed
    n_problems: int = 0

    def gamma(self, solver, tau) -> float:
        """Evaluate ``gamma_s`` at an arbitrary ``tau`` (right-continuous)."""
        idx = np.searchsorted(self.taus, tau, side="right") - 1
        if idx < 0:
            return 0.0
        return float(self.gammas[solver][idx])


def performance_ratios(table: BenchTable):
    t = table.t
    solved = np.isfinite(t).any(axis=1)
    best = np.where(solved, np.min(t, axis=1), INF)
    with np.errstate(invalid="ignore"):
        r = t[solved] / best[solved, None]
    return r, [p for p, ok in zip(table.problems, solved) if not ok]


def performance_profile(table: BenchTable) -> Profile:
    r, excluded = performance_ratios(table)
    if excluded:
        warnings.warn(f"{len(excluded)} problem(s) with no successful solver excluded "
                      "from the performance profile", stacklevel=2)
    n_p = r.shape[0]
    finite = r[np.isfinite(r)]
    taus = np.unique(np.concatenate([[1.0], finite]))
    gammas = {}
    for j, s in enumerate(table.solvers):
        col = np.sort(r[:, j])
        counts = np.searchsorted(col, taus, side="right")
        gammas[s] = counts / n_p if n_p else np.zeros_like(taus)
    return Profile(table.solvers, taus, gammas, tuple(excluded), n_p)


# ------------------------------------------------------------------ bench rows

@dataclass(frozen=True)
class BenchRow:
    problem: str
    start_id: int
    solver: str
    status: str
    iters: int
    fevals: int
    jevals: int
    final_F: tuple
    final_crit: float

    @property
    def converged(self) -> bool:
        return self.status == "Converged"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def results_header(m: int) -> list:
    return (["problem", "start_id", "solver", "status", "iters", "fevals", "jevals"]
            + [f"final_f_{i + 1}" for i in range(m)] + ["final_crit"])


def results_lines(rows: Iterable[BenchRow]) -> list:
    out = []
    for r in rows:
        out.append([r.problem, str(r.start_id), r.solver, r.status, str(r.iters),
                    str(r.fevals), str(r.jevals)] + [_fmt(v) for v in r.final_F]
                   + [_fmt(r.final_crit)])
    return out


def write_results_csv(rows: Sequence[BenchRow], fh, metadata: Mapping | None = None) -> None:
    """Results table; ``metadata`` goes to leading ``#`` comment lines."""
    m = len(rows[0].final_F) if rows else 2
    for key, value in (metadata or {}).items():
        fh.write(f"# {key}: {value}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(results_header(m))
    w.writerows(results_lines(rows))


def read_results_csv(path) -> tuple:
    """Parse a results file into ``(rows, metadata)``."""
    rows, meta, header = [], {}, None
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.rstrip("\r\n")
            if not text.strip():
                continue
            if text.startswith("#"):
                key, _, value = text[1:].partition(":")
                meta[key.strip()] = value.strip()
                continue
            fields = next(csv.reader([text]))
            if header is None:
                header = fields
                if header[:7] != results_header(0)[:7] or header[-1] != "final_crit":
                    raise ParseError(f"{path}: line {lineno}: unexpected header {text!r}")
                m = len(header) - 8
                continue
            if len(fields) != len(header):
                raise ParseError(f"{path}: line {lineno}: expected {len(header)} fields, "
                                 f"got {len(fields)}")
            try:
                rows.append(BenchRow(fields[0], int(fields[1]), fields[2], fields[3],
                                     int(fields[4]), int(fields[5]), int(fields[6]),
                                     tuple(float(v) for v in fields[7:7 + m]),
                                     float(fields[-1])))
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if header is None:
        raise ParseError(f"{path}: line 1: no header found (empty results file)")
    if not rows:
        raise ParseError(f"{path}: line {lineno}: no data rows")
    return rows, meta


def bench_table(rows: Sequence[BenchRow], metric: str = "iters", solvers=None) -> BenchTable:
    """Performance table with one problem per (pair, start) combination.

    Runs that did not converge get ``inf``. Iteration counts are floored at
    one so a start that is already critical still has a positive cost.
    """
    if metric not in ("iters", "fevals"):
        raise InvalidInput(f"metric must be 'iters' or 'fevals', got {metric!r}")
    solvers = tuple(solvers) if solvers else tuple(dict.fromkeys(r.solver for r in rows))
    probs = sorted({(r.problem, r.start_id) for r in rows})
    index = {p: i for i, p in enumerate(probs)}
    col = {s: j for j, s in enumerate(solvers)}
    t = np.full((len(probs), len(solvers)), INF)
    for r in rows:
        if r.solver not in col or not r.converged:
            continue
        v = r.iters if metric == "iters" else r.fevals
        t[index[(r.problem, r.start_id)], col[r.solver]] = max(v, 1)
    return BenchTable(solvers, tuple(f"{p}:{s}" for p, s in probs), t)


def solver_fronts(rows: Sequence[BenchRow]) -> dict:
    """``problem -> solver -> array`` of final values from converged runs."""
    out = defaultdict(lambda: defaultdict(list))
    for r in rows:
        out[r.problem][r.solver]  # register the solver even without converged runs
        if r.converged:
            out[r.problem][r.solver].append(r.final_F)
    return {p: {s: np.array(v, dtype=float) for s, v in d.items()} for p, d in out.items()}


def pairwise_purity_tables(results: Sequence[BenchRow], pair) -> BenchTable:
    """Purity of two solvers per problem, as a table for ``performance_profile``."""
    a, b = pair
    known = {r.solver for r in results}
    for s in (a, b):
        if s not in known:
            raise InvalidInput(f"unknown solver {s!r}; results contain {sorted(known)}")
    fronts = solver_fronts(results)
    probs = sorted(fronts)
    t = np.full((len(probs), 2), INF)
    for i, p in enumerate(probs):
        sub = {a: fronts[p].get(a, np.empty((0, 0))), b: fronts[p].get(b, np.empty((0, 0)))}
        try:
            pur = purity(sub)
        except EmptyFront:
            continue
        t[i] = pur[a], pur[b]
    return BenchTable((a, b), tuple(probs), t)


def write_profile_csv(profile: Profile, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["solver", "tau", "gamma"])
    for s in profile.solvers:
        for tau, g in zip(profile.taus, profile.gammas[s]):
            w.writerow([s, _fmt(tau), _fmt(g)])
