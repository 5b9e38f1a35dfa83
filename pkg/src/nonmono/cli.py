"""Command-line front end: single runs, benchmark sweeps and their analysis."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from . import __version__
from . import bounds as _bounds
from . import metrics as _metrics
from . import rules as _rules
from . import solver as _solver
from . import testsuite as _ts
from .errors import InvalidDimension, InvalidInput, NonmonoError, ParseError, UnknownProblem

JOBS_ENV = "NONMONO_JOBS"
DEFAULT_SOLVERS = ("M", "N1", "N2", "Nh")


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class SolverDef:
    """A labelled (rule, config) pair; built from a preset or an inline rule."""

    label: str
    rule: object
    config: _solver.SolverConfig


def solver_def(entry, eps: float, max_iters: int) -> SolverDef:
    """Resolve a preset name or an inline ``{"name", "rule", "mk"}`` mapping."""
    if isinstance(entry, str):
        if entry in _solver.PRESETS:
            rule, cfg = _solver.preset_solver(entry, eps=eps, max_iters=max_iters)
            return SolverDef(entry, rule, cfg)
        rule = _rules.parse_rule(entry)
        return SolverDef(entry, rule, _solver.SolverConfig(eps=eps, max_iters=max_iters))
    if isinstance(entry, dict):
        unknown = set(entry) - {"name", "rule", "mk"}
        if unknown or "rule" not in entry:
            raise InvalidInput(f"inline solver needs 'rule' (and optional 'name', 'mk'): {entry}")
        rule = _rules.parse_rule(entry["rule"])
        mk = entry.get("mk", 0)
        cfg = _solver.SolverConfig(mk_schedule=mk, eps=eps, max_iters=max_iters)
        return SolverDef(entry.get("name", entry["rule"]), rule, cfg)
    raise InvalidInput(f"cannot interpret solver entry {entry!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str = "mgh_rastrigin"
    n: int = _ts.DEFAULT_N
    a: float = _ts.DEFAULT_A
    problems: tuple = _ts.MGH_NAMES
    solvers: tuple = DEFAULT_SOLVERS
    eps: float = 1e-4
    max_iters: int = 1000
    seed: int = 0
    out: str = "results.csv"
    timing: Optional[str] = None
    jobs: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.suite != "mgh_rastrigin":
            raise InvalidInput(f"suite {self.suite!r} is not available from the command line; "
                               "custom problems go through nonmono.solver.run")
        problems = tuple(_ts.canonical_name(p) for p in self.problems)
        for p in problems:
            _ts.mgh_residuals(p, self.n)
        if not self.a > 0:
            raise InvalidInput("a must be positive")
        if self.jobs < 1:
            raise InvalidInput("jobs must be >= 1")
        defs = [solver_def(s, self.eps, self.max_iters) for s in self.solvers]
        labels = [d.label for d in defs]
        if len(set(labels)) != len(labels):
            raise InvalidInput(f"duplicate solver labels {labels}")
        return replace(self, problems=problems)

    def solver_defs(self) -> list:
        return [solver_def(s, self.eps, self.max_iters) for s in self.solvers]


def load_config(path: Optional[str], overrides: dict) -> ExperimentConfig:
    """Defaults, then the JSON file, then command-line overrides."""
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ParseError(f"{path}: line 1: config must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise InvalidInput(f"unknown config keys {sorted(unknown)}")
    if "jobs" not in data and "jobs" not in overrides and os.environ.get(JOBS_ENV):
        data["jobs"] = os.environ[JOBS_ENV]
    data.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("problems", "solvers"):
        if key in data:
            data[key] = tuple(data[key])
    try:
        for key in ("n", "max_iters", "seed", "jobs"):
            if key in data:
                data[key] = int(data[key])
        for key in ("a", "eps"):
            if key in data:
                data[key] = float(data[key])
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"bad config value: {exc}") from exc
    return ExperimentConfig(**data).validate()


# ------------------------------------------------------------------ bench

def _bench_task(task, inspect=None):
    problem_name, n, a, sdef, start_ids = task
    problem = _ts.build_benchmark(problem_name, n, a)
    grid = _ts.standard_start_grid(n, a)
    out = []
    for sid in start_ids:
        res = _solver.run(problem, grid[sid], sdef.rule, sdef.config)
        row = _metrics.BenchRow(problem_name, sid, sdef.label, res.status, res.iterations,
                                res.f_evals, res.jacobian_evals,
                                tuple(float(v) for v in res.final_F), float(res.final_crit))
        if inspect is not None:
            inspect(row, res)
        out.append((row, res.wall_time))
    return out


def run_bench(cfg: ExperimentConfig, progress=None, inspect=None):
    """Run every (problem, start, solver) triple; rows come back sorted.

    ``inspect(row, result)`` sees every full run result; it forces serial
    execution since results do not cross process boundaries.
    """
    defs = cfg.solver_defs()
    n_starts = len(_ts.standard_start_grid(cfg.n, cfg.a))
    tasks = [(p, cfg.n, cfg.a, d, tuple(range(n_starts))) for p in cfg.problems for d in defs]
    if cfg.jobs > 1 and inspect is None:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(_bench_task, tasks))
    else:
        chunks = []
        for t in tasks:
            chunks.append(_bench_task(t, inspect))
            if progress:
                progress(t[0], t[3].label)
    p_rank = {p: i for i, p in enumerate(cfg.problems)}
    s_rank = {d.label: i for i, d in enumerate(defs)}
    pairs = [item for chunk in chunks for item in chunk]
    pairs.sort(key=lambda it: (p_rank[it[0].problem], it[0].start_id, s_rank[it[0].solver]))
    return [r for r, _ in pairs], [w for _, w in pairs]


def bench_metadata(cfg: ExperimentConfig) -> dict:
    return {
        "generated": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "nonmono": __version__,
        "suite": cfg.suite,
        "n": cfg.n,
        "a": cfg.a,
        "eps": cfg.eps,
        "max_iters": cfg.max_iters,
        "seed": cfg.seed,
        "solvers": ",".join(str(s) if isinstance(s, str) else json.dumps(s) for s in cfg.solvers),
        "conventions": "profiles assign inf to non-converged runs and floor iteration counts "
                       "at 1; purity fronts use final points of converged runs only",
    }


# ------------------------------------------------------------------ SVG

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def profile_svg(profile: _metrics.Profile, title: str = "", width=640, height=420) -> str:
    """Self-contained SVG of the profile step curves on a log2 tau axis."""
    left, right, top, bottom = 60, 150, 30, 50
    pw, ph = width - left - right, height - top - bottom
    lt = np.log2(profile.taus)
    xmax = max(float(lt[-1]) * 1.05, 1.0)

    def X(v):
        return left + pw * v / xmax

    def Y(g):
        return top + ph * (1.0 - g)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="12">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for g in np.linspace(0, 1, 6):
        parts.append(f'<text x="{left - 8}" y="{Y(g) + 4:.1f}" text-anchor="end">{g:.1f}</text>')
    for v in range(int(np.floor(xmax)) + 1):
        parts.append(f'<text x="{X(v):.1f}" y="{top + ph + 16}" text-anchor="middle">{v}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">log2(tau)</text>')
    if title:
        parts.append(f'<text x="{left + pw / 2}" y="{top - 10}" text-anchor="middle">{title}</text>')
    for j, s in enumerate(profile.solvers):
        color = _COLORS[j % len(_COLORS)]
        gam = profile.gammas[s]
        pts = []
        for i, (x, g) in enumerate(zip(lt, gam)):
            if i:
                pts.append((X(x), Y(gam[i - 1])))
            pts.append((X(x), Y(g)))
        pts.append((X(xmax), Y(gam[-1])))
        path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        ly = top + 16 + 18 * j
        parts.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 36}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{left + pw + 42}" y="{ly + 4}">{s}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ------------------------------------------------------------------ commands

def _csv_list(text):
    return tuple(t.strip() for t in text.split(",") if t.strip()) if text else None


def cmd_list_problems(args, out):
    for name, entry in _ts.MGH_FUNCTIONS.items():
        out.write(f"{name}\t{entry.display}\n")
    return 0


def cmd_run(args, out):
    cfg = load_config(None, {"n": args.n, "a": args.a})
    problem = _ts.build_benchmark(args.problem, cfg.n, cfg.a)
    if args.x0:
        x0 = np.array([float(v) for v in args.x0.split(",")])
        start = "x0"
    else:
        grid = _ts.standard_start_grid(cfg.n, cfg.a)
        if not 0 <= args.start_index < len(grid):
            raise InvalidInput(f"start index must lie in [0, {len(grid) - 1}]")
        x0, start = grid[args.start_index], str(args.start_index)
    overrides = {k: v for k, v in (("eps", args.eps), ("max_iters", args.max_iters)) if v is not None}
    if args.rule:
        rule = _rules.parse_rule(args.rule)
        config = _solver.SolverConfig(mk_schedule=_mk(args.mk) if args.mk else 0, **overrides)
        label = args.rule
    else:
        rule, config = _solver.preset_solver(args.solver, **overrides)
        if args.mk:
            config = replace(config, mk_schedule=_mk(args.mk))
        label = args.solver
    result = _solver.run(problem, x0, rule, config)
    path = args.out or f"run_{problem.name}_{start}_{label.replace(':', '_')}.csv"
    _solver.write_trajectory_csv(result, path)
    out.write(f"status: {result.status}\niterations: {result.iterations}\n"
              f"final_crit: {result.final_crit:.6e}\ntrajectory: {path}\n")
    if result.message:
        out.write(f"message: {result.message}\n")
    return 0 if result.status in (_solver.CONVERGED, _solver.MAX_ITERATIONS) else 1


def _mk(text):
    return text if text in ("half", "all") else int(text)


def cmd_bench(args, out):
    overrides = {"problems": _csv_list(args.problems), "solvers": _csv_list(args.solvers),
                 "eps": args.eps, "max_iters": args.max_iters, "n": args.n, "a": args.a,
                 "seed": args.seed, "out": args.out, "timing": args.timing, "jobs": args.jobs}
    cfg = load_config(args.config, overrides)
    t0 = time.perf_counter()
    rows, walls = run_bench(cfg)
    with open(cfg.out, "w", newline="") as fh:
        _metrics.write_results_csv(rows, fh, bench_metadata(cfg))
    timing = cfg.timing or _timing_path(cfg.out)
    with open(timing, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["problem", "start_id", "solver", "wall_time"])
        for r, wt in zip(rows, walls):
            w.writerow([r.problem, r.start_id, r.solver, "%.6f" % wt])
    counts = {}
    for r in rows:
        counts[r.status] = counts.get(r.status, 0) + 1
    out.write(f"{len(rows)} runs in {time.perf_counter() - t0:.1f} s -> {cfg.out}\n")
    for k in sorted(counts):
        out.write(f"  {k}: {counts[k]}\n")
    return 0


def _timing_path(path):
    root, ext = os.path.splitext(path)
    return f"{root}.timing{ext or '.csv'}"


def cmd_profile(args, out):
    rows, _ = _metrics.read_results_csv(args.results)
    if args.purity:
        pair = _csv_list(args.pair)
        if not pair or len(pair) != 2:
            raise InvalidInput("--purity needs --pair A,B")
        table = _metrics.pairwise_purity_tables(rows, pair)
        title = f"purity profile {pair[0]} vs {pair[1]}"
    else:
        solvers = _csv_list(args.solvers)
        if solvers:
            missing = set(solvers) - {r.solver for r in rows}
            if missing:
                raise InvalidInput(f"solvers not in results: {sorted(missing)}")
        table = _metrics.bench_table(rows, args.metric, solvers)
        title = f"performance profile ({args.metric})"
    prof = _metrics.performance_profile(table)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            _metrics.write_profile_csv(prof, fh)
    else:
        _metrics.write_profile_csv(prof, out)
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(profile_svg(prof, title))
    if prof.excluded:
        sys.stderr.write(f"excluded {len(prof.excluded)} problem(s) where every solver failed\n")
    return 0


def cmd_purity(args, out):
    rows, _ = _metrics.read_results_csv(args.results)
    pair = _csv_list(args.pair)
    fronts = _metrics.solver_fronts(rows)
    solvers = pair or tuple(dict.fromkeys(r.solver for r in rows))
    known = {r.solver for r in rows}
    if set(solvers) - known:
        raise InvalidInput(f"solvers not in results: {sorted(set(solvers) - known)}")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["problem"] + list(solvers))
    for p in sorted(fronts):
        sub = {s: fronts[p].get(s, np.empty((0, 0))) for s in solvers}
        try:
            pur = _metrics.purity(sub)
        except _metrics.EmptyFront:
            pur = {s: _metrics.INF for s in solvers}
        w.writerow([p] + ["%.6g" % pur[s] for s in solvers])
    return 0


def cmd_gradcheck(args, out, registry=None):
    objectives = registry if registry is not None else _ts.registered_objectives(args.n)
    if args.problem:
        key = args.problem.strip().lower()
        if key != "rastrigin":
            key = _ts.canonical_name(args.problem)
        objectives = [o for o in objectives if o.name == key]
        if not objectives:
            raise UnknownProblem(f"{args.problem!r} is not in the registry")
    rng = np.random.default_rng(args.seed)
    pts = _ts.sample_box(rng, args.n, args.a, args.points)
    ok = True
    out.write(f"{'objective':<28} {'max_rel_err':>12}  result\n")
    for obj in objectives:
        rep = _ts.check_gradient(obj, pts, h=args.h, tol=args.tol)
        err = rep.max_rel_error[obj.name]
        out.write(f"{obj.name:<28} {err:12.3e}  {'ok' if rep.passed else 'FAIL'}\n")
        ok &= rep.passed
    return 0 if ok else 1


def cmd_bound(args, out):
    theta = _floats(args.theta)
    H = _floats(args.H)
    f_star = _floats(args.f_star)
    F0 = _floats(args.F0)
    m = max(len(theta), len(H), len(f_star), len(F0))
    theta, H, f_star, F0 = (v * m if len(v) == 1 else v for v in (theta, H, f_star, F0))
    model = _bounds.SmoothnessModel(theta, H, f_star)
    rule = _rules.parse_rule(args.rule)
    rmodel = _bounds.complexity_model(rule, F0, model)
    rep = _bounds.bound_report(model, rmodel, F0, args.eps, args.c1, args.c2, args.rho, args.beta)
    out.write(f"kappa1     {rep.kappa1:.10g}\n")
    out.write(f"kappa2     {rep.kappa2:.10g}\n")
    out.write(f"theta_min  {rep.theta_min:.10g}\n")
    out.write(f"delta      {rep.delta:.10g}\n")
    out.write(f"C_i        {' '.join('%.10g' % c for c in rep.C)}   ({rmodel.note})\n")
    out.write(f"decrease   {' '.join('%.10g' % c for c in rep.decrease_terms)}\n")
    out.write(f"T_max      {rep.T_max}\n")
    return 0


def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InvalidInput(f"expected comma-separated numbers, got {text!r}") from exc


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonmono", description=__doc__)
    ap.add_argument("--version", action="version", version=f"nonmono {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("list-problems", help="list the benchmark objectives paired with Rastrigin")

    r = sub.add_parser("run", help="run one solver from one starting point")
    r.add_argument("--problem", required=True)
    g = r.add_mutually_exclusive_group()
    g.add_argument("--start-index", type=int, default=40)
    g.add_argument("--x0", help="comma-separated starting point")
    r.add_argument("--solver", default="N2", choices=_solver.PRESETS)
    r.add_argument("--rule", help="inline rule such as 'metropolis:gamma=2' (overrides --solver)")
    r.add_argument("--mk", help="integer, 'half' or 'all'")
    r.add_argument("--eps", type=float)
    r.add_argument("--max-iters", type=int)
    r.add_argument("--n", type=int)
    r.add_argument("--a", type=float)
    r.add_argument("--out", help="trajectory CSV path")

    b = sub.add_parser("bench", help="run the benchmark sweep")
    b.add_argument("--config", help="JSON experiment configuration")
    b.add_argument("--problems", help="comma-separated subset of problems")
    b.add_argument("--solvers", help="comma-separated presets")
    b.add_argument("--eps", type=float)
    b.add_argument("--max-iters", type=int)
    b.add_argument("--n", type=int)
    b.add_argument("--a", type=float)
    b.add_argument("--seed", type=int)
    b.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV} or 1)")
    b.add_argument("--out")
    b.add_argument("--timing", help="per-run wall time CSV (default <out>.timing.csv)")

    p = sub.add_parser("profile", help="performance or purity profile from a results CSV")
    p.add_argument("results")
    p.add_argument("--metric", choices=("iters", "fevals"), default="iters")
    p.add_argument("--solvers")
    p.add_argument("--purity", action="store_true")
    p.add_argument("--pair")
    p.add_argument("--out", help="profile CSV path (default stdout)")
    p.add_argument("--svg")

    u = sub.add_parser("purity", help="per-problem purity table")
    u.add_argument("results")
    u.add_argument("--pair")

    c = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    c.add_argument("--problem")
    c.add_argument("--points", type=int, default=100)
    c.add_argument("--h", type=float, default=1e-6)
    c.add_argument("--tol", type=float, default=1e-5)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--n", type=int, default=_ts.DEFAULT_N)
    c.add_argument("--a", type=float, default=_ts.DEFAULT_A)

    d = sub.add_parser("bound", help="worst-case iteration bound")
    d.add_argument("--theta", default="1")
    d.add_argument("--H", required=True)
    d.add_argument("--f-star", default="0")
    d.add_argument("--F0", required=True)
    d.add_argument("--rule", default="monotone")
    d.add_argument("--eps", type=float, required=True)
    d.add_argument("--rho", type=float, default=1e-4)
    d.add_argument("--beta", type=float, default=0.5)
    d.add_argument("--c1", type=float, default=1.0)
    d.add_argument("--c2", type=float, default=1.0)
    return ap


_COMMANDS = {"list-problems": cmd_list_problems, "run": cmd_run, "bench": cmd_bench,
             "profile": cmd_profile, "purity": cmd_purity, "gradcheck": cmd_gradcheck,
             "bound": cmd_bound}


def main(argv=None, *, registry=None, out=None) -> int:
    """Entry point. ``registry`` replaces the gradcheck objectives (testing hook)."""
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(args, out, registry)
        return _COMMANDS[args.command](args, out)
    except UnknownProblem as exc:
        sys.stderr.write(f"UnknownProblem: {exc}\n")
    except ParseError as exc:
        sys.stderr.write(f"ParseError: {exc}\n")
    except (InvalidInput, InvalidDimension) as exc:
        sys.stderr.write(f"InvalidInput: {exc}\n")
    except FileNotFoundError as exc:
        sys.stderr.write(f"InvalidInput: {exc}\n")
    except NonmonoError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
    return 2


if __name__ == "__main__":
    sys.exit(main())
