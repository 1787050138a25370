"""Batch CLI: deterministic verification runs with JSON reports.

Exit codes: 0 = all asserted contracts hold, 2 = a contract was violated
(a mathematical finding, not a crash), 3 = tool or configuration error.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

from . import __version__
from ._parallel import resolve_workers
from .backend import backend_name
from .errors import ConfigError, NonConvergenceError, S2Error
from .fdsolver import (
    BOUNDARY_FAMILIES,
    concentration_diagnostic,
    scaling_experiment,
    solve_dirichlet,
)
from .grids import write_s2grid
from .jacobicert import DEFAULT_EPSILON
from .legendre import TransformConfig
from .report import CheckAgg, build_report, violation_count, write_report
from .verify import run_jacobi_verification, run_remark_ratio, run_transform_verification

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_ERROR)


def _parse_k(value: str) -> float:
    k = float(value)
    if math.isnan(k):
        raise argparse.ArgumentTypeError("K must not be NaN")
    return k


def build_parser() -> _Parser:
    parser = _Parser(prog="s2wb", description=__doc__)
    parser.add_argument("--version", action="version", version=f"s2wb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    pj = sub.add_parser("verify-jacobi", help="shifted-trace Jacobi certificate batch")
    pj.add_argument("--n", type=int, default=3)
    pj.add_argument("--k-semiconvex", type=_parse_k, default=1.0,
                    help="semiconvexity constant K ('inf' drops the floor)")
    pj.add_argument("--samples", type=int, default=100000)
    pj.add_argument("--seed", type=int, default=0)
    pj.add_argument("--j-override", type=float, default=None,
                    help="override the default shift J = 8nK/3")
    pj.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    pj.add_argument("--lam-max", type=float, default=None)
    pj.add_argument("--pin-prob", type=float, default=0.25)
    pj.set_defaults(func=cmd_verify_jacobi)

    pt = sub.add_parser("verify-transform", help="Legendre-Lewy transform identities")
    pt.add_argument("--n", type=int, default=3)
    pt.add_argument("--k-semiconvex", type=_parse_k, default=1.0)
    pt.add_argument("--kbar", type=float, default=None)
    pt.add_argument("--samples", type=int, default=50000)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--lam-max", type=float, default=None)
    pt.add_argument("--pin-prob", type=float, default=0.25)
    pt.add_argument("--ray", action="store_true", help="include the lam_1 -> 1e6 ray family")
    pt.add_argument("--ray-count", type=int, default=1024)
    pt.add_argument("--concavity-pairs", type=int, default=10000)
    pt.set_defaults(func=cmd_verify_transform)

    ps = sub.add_parser("solve", help="finite-difference Dirichlet solve of sigma_2 = 1")
    ps.add_argument("--n", type=int, default=2, choices=(2, 3))
    ps.add_argument("--extent", "--R", dest="extent", type=float, default=1.0)
    ps.add_argument("--m", type=int, default=65)
    ps.add_argument("--k-semiconvex", type=_parse_k, default=1.0)
    ps.add_argument("--boundary", choices=sorted(BOUNDARY_FAMILIES), default="quadratic")
    ps.add_argument("--amplitude", type=float, default=0.1)
    ps.add_argument("--tol", type=float, default=1e-10)
    ps.add_argument("--max-iter", type=int, default=30)
    ps.add_argument("--grid-out", type=str, default=None, help="S2GRID v1 output path")
    ps.set_defaults(func=cmd_solve)

    pe = sub.add_parser("experiment", help="Hessian-oscillation scaling experiment")
    pe.add_argument("--n", type=int, default=2, choices=(2, 3))
    pe.add_argument("--extent", "--R", dest="extents", type=float, action="append",
                    help="box half-width; repeat for a sweep (default 1 2 4 8)")
    pe.add_argument("--m", type=int, action="append", dest="ms",
                    help="nodes per axis; repeat for a refinement pair (default 65)")
    pe.add_argument("--k-semiconvex", type=_parse_k, default=1.0)
    pe.add_argument("--boundary", choices=sorted(BOUNDARY_FAMILIES), default="gauss")
    pe.add_argument("--amplitude", type=float, default=0.1)
    pe.add_argument("--tol", type=float, default=1e-10)
    pe.add_argument("--max-iter", type=int, default=30)
    pe.add_argument("--xi", type=float, default=0.01)
    pe.add_argument("--levels", type=int, default=3)
    pe.add_argument("--outdir", type=str, default=None, help="where grid files go")
    pe.set_defaults(func=cmd_experiment)

    for p in (pj, pt, ps, pe):
        p.add_argument("--workers", type=int, default=None,
                       help="worker threads (S2WB_THREADS overrides); must not affect results")
        p.add_argument("--out", type=str, default=None, help="report JSON path (default stdout)")
    return parser


def _k_repr(k: float):
    return "inf" if math.isinf(k) else k


def _finish(ns, command, config, checks, results, started) -> int:
    runtime = {
        "wall_time_s": time.monotonic() - started,
        "workers": resolve_workers(ns.workers),
        "backend": backend_name(),
    }
    rep = build_report(command, config, checks, results, runtime)
    if ns.out:
        write_report(rep, ns.out)
    else:
        from .report import dumps_report
        print(dumps_report(rep))
    return EXIT_VIOLATION if violation_count(rep) > 0 else EXIT_OK


def cmd_verify_jacobi(ns) -> int:
    started = time.monotonic()
    if ns.n < 2:
        raise ConfigError("need n >= 2")
    if not math.isinf(ns.k_semiconvex) and ns.k_semiconvex <= 0:
        raise ConfigError("K must be positive (or 'inf')")
    if math.isinf(ns.k_semiconvex) and ns.j_override is None:
        raise ConfigError("K = inf requires --j-override (e.g. 0 for the 3-d remark)")
    workers = resolve_workers(ns.workers)
    checks, extras = run_jacobi_verification(
        ns.n, ns.k_semiconvex, ns.samples, ns.seed, shift=ns.j_override,
        epsilon=ns.epsilon, lam_max=ns.lam_max, pin_prob=ns.pin_prob, workers=workers)
    if ns.n == 3 and ns.j_override == 0.0:
        remark_checks, _ = run_remark_ratio(ns.samples, ns.seed, workers=workers)
        checks.extend(remark_checks)
    config = {
        "n": ns.n, "k_semiconvex": _k_repr(ns.k_semiconvex), "samples": ns.samples,
        "seed": ns.seed, "shift": extras["shift"], "epsilon": ns.epsilon,
        "lam_max": ns.lam_max, "pin_prob": ns.pin_prob,
    }
    return _finish(ns, "verify-jacobi", config, checks, extras, started)


def cmd_verify_transform(ns) -> int:
    started = time.monotonic()
    if ns.n < 2:
        raise ConfigError("need n >= 2")
    if math.isinf(ns.k_semiconvex) or ns.k_semiconvex <= 0:
        raise ConfigError("transform verification needs finite K > 0")
    if ns.kbar is not None and ns.kbar <= ns.k_semiconvex:
        raise ConfigError(f"Kbar = {ns.kbar} <= K = {ns.k_semiconvex} is invalid")
    workers = resolve_workers(ns.workers)
    checks, extras = run_transform_verification(
        ns.n, ns.k_semiconvex, ns.samples, ns.seed, kbar=ns.kbar,
        lam_max=ns.lam_max, pin_prob=ns.pin_prob, ray=ns.ray,
        ray_count=ns.ray_count, concavity_pairs=ns.concavity_pairs, workers=workers)
    config = {
        "n": ns.n, "k_semiconvex": ns.k_semiconvex, "samples": ns.samples,
        "seed": ns.seed, "kbar": extras["kbar"], "kbar_rule": extras["kbar_rule"],
        "lam_max": ns.lam_max, "pin_prob": ns.pin_prob, "ray": ns.ray,
        "ray_count": ns.ray_count, "concavity_pairs": ns.concavity_pairs,
    }
    return _finish(ns, "verify-transform", config, checks, extras, started)


def cmd_solve(ns) -> int:
    started = time.monotonic()
    boundary = BOUNDARY_FAMILIES[ns.boundary](ns.n, ns.extent, ns.amplitude)
    grid, report = solve_dirichlet(boundary, ns.extent, ns.m, ns.k_semiconvex,
                                   newton_tol=ns.tol, max_iter=ns.max_iter, n=ns.n)
    if ns.grid_out:
        write_s2grid(grid, ns.grid_out)
    checks = [
        CheckAgg("converged", f"residual <= {ns.tol}"),
        CheckAgg("branch_positive", "positive-trace branch maintained"),
        CheckAgg("semiconvexity", "min eig of D^2_h u + K I >= 0", asserted=False),
    ]
    checks[0].update([ns.tol - report.final_residual])
    checks[1].update([1.0 if report.branch.name == "POSITIVE_TRACE" else -1.0])
    checks[2].update([report.min_semiconvexity])
    config = {
        "n": ns.n, "extent": ns.extent, "m": ns.m, "k_semiconvex": ns.k_semiconvex,
        "boundary": ns.boundary, "amplitude": ns.amplitude, "tol": ns.tol,
        "max_iter": ns.max_iter, "grid_out": ns.grid_out,
    }
    results = {
        "iterations": report.iterations,
        "final_residual": report.final_residual,
        "min_semiconvexity": report.min_semiconvexity,
        "branch": report.branch.value,
        "residual_history": list(report.residual_history),
        "projections": list(report.projections),
        "mmatrix_violations": report.mmatrix_violations,
    }
    return _finish(ns, "solve", config, checks, results, started)


def cmd_experiment(ns) -> int:
    started = time.monotonic()
    extents = ns.extents or [1.0, 2.0, 4.0, 8.0]
    ms = ns.ms or [65]
    boundary = BOUNDARY_FAMILIES[ns.boundary](ns.n, extents[0], ns.amplitude)
    outdir = Path(ns.outdir) if ns.outdir else (Path(ns.out).parent if ns.out else None)
    tables = {}
    partial = False
    for m in ms:
        try:
            result, grids = scaling_experiment(boundary, extents, m, ns.k_semiconvex,
                                               n=ns.n, newton_tol=ns.tol,
                                               max_iter=ns.max_iter, keep_grids=True)
        except NonConvergenceError as exc:
            tables[m] = {"error": str(exc), "rows": []}
            partial = True
            continue
        tables[m] = {
            "rows": [{"R": r.extent, "osc": r.osc, "osc_entries": list(r.osc_entries),
                      "iterations": r.iterations, "residual": r.residual}
                     for r in result.rows],
            "alpha_hat": result.alpha_hat,
            "strictly_decreasing": result.strictly_decreasing,
        }
        if outdir is not None:
            outdir.mkdir(parents=True, exist_ok=True)
            for row, (ugrid, _) in zip(result.rows, grids):
                write_s2grid(ugrid, outdir / f"solution_n{ns.n}_m{m}_R{row.extent:g}.grid")
        cfg = TransformConfig(n=ns.n, K=ns.k_semiconvex)
        tables[m]["concentration"] = concentration_diagnostic(grids[-1][1], cfg, ns.xi, ns.levels)

    checks = []
    main_m = ms[0]
    if "rows" in tables[main_m] and tables[main_m]["rows"]:
        rows = tables[main_m]["rows"]
        if ns.boundary == "quadratic":
            floor = CheckAgg("oscillation_floor", "osc <= 1e-9 for quadratic data")
            floor.update([1e-9 - r["osc"] for r in rows])
            checks.append(floor)
        else:
            dec = CheckAgg("oscillation_decreasing", "osc strictly decreasing in R")
            dec.update([a["osc"] - b["osc"] for a, b in zip(rows, rows[1:])])
            alpha = CheckAgg("alpha_positive", "fitted decay exponent > 0")
            alpha.update([tables[main_m]["alpha_hat"]])
            checks.extend([dec, alpha])
    if len(ms) == 2 and all("rows" in tables[m] and tables[m]["rows"] for m in ms):
        agree = CheckAgg("refinement_agreement", "osc change <= 10% when m doubles")
        r0 = {row["R"]: row["osc"] for row in tables[ms[0]]["rows"]}
        r1 = {row["R"]: row["osc"] for row in tables[ms[1]]["rows"]}
        margins = [0.10 - abs(r0[R] - r1[R]) / max(abs(r0[R]), 1e-300)
                   for R in sorted(set(r0) & set(r1))]
        agree.update(margins)
        checks.append(agree)

    if ns.out:
        csv_path = Path(ns.out).with_suffix(".csv")
        with open(csv_path, "w", encoding="ascii") as fh:
            fh.write("m,R,osc,alpha_hat\n")
            for m in ms:
                for row in tables[m].get("rows", []):
                    fh.write(f"{m},{row['R']!r},{row['osc']!r},{tables[m]['alpha_hat']!r}\n")

    config = {
        "n": ns.n, "extents": extents, "ms": ms, "k_semiconvex": ns.k_semiconvex,
        "boundary": ns.boundary, "amplitude": ns.amplitude, "tol": ns.tol,
        "max_iter": ns.max_iter, "xi": ns.xi, "levels": ns.levels,
    }
    code = _finish(ns, "experiment", config, checks, {"tables": tables}, started)
    if partial:
        return EXIT_ERROR
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"s2wb: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except S2Error as exc:
        print(f"s2wb: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
