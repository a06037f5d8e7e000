"""Benchmark command line: run one solver, compare several, or plot traces.

Exit codes: 0 when every requested run converged, 2 when a run stopped at
the iteration cap, 1 for any usage, file or data error.  Output files are
written to a temporary sibling and renamed on success only.
"""

import argparse
import math
import os
import sys

import numpy as np

from .baselines import BaselineOptions, davidson_solve, lobpcg_solve
from .errors import BlockeigError
from .plotting import render_convergence_svg
from .ppcg import SolverOptions, ppcg_solve
from .problems import (
    jacobi_preconditioner,
    laplacian_1d,
    laplacian_3d,
    random_hermitian,
    read_matrix_market,
    well_problem,
)
from .trace import parse_trace_csv, trace_to_csv, trace_to_json

_SOLVERS = ("ppcg", "davidson", "lobpcg")


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors must exit 1, not argparse's default 2
    def error(self, message):
        raise _CliError(message)


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _parse_problem(spec, seed):
    kind, _, arg = spec.partition(":")
    try:
        if kind == "mm":
            if not arg:
                raise _CliError("mm problem needs a path: mm:<path>")
            return read_matrix_market(arg)
        if kind == "lap1d":
            return laplacian_1d(int(arg))
        if kind == "lap3d":
            nx, ny, nz = (int(v) for v in arg.split(","))
            return laplacian_3d(nx, ny, nz)
        if kind == "well":
            nx, ny, nz, depth = arg.split(",")
            return well_problem(int(nx), int(ny), int(nz), float(depth), seed=seed)
        if kind == "rand":
            n, density = arg.split(",")
            return random_hermitian(int(n), float(density), seed=seed)
    except (ValueError, OSError) as err:
        raise _CliError(f"bad problem spec {spec!r}: {err}") from None
    raise _CliError(f"unknown problem kind {kind!r} (use mm|lap1d|lap3d|well|rand)")


def _parse_orth_policy(text):
    if text == "every":
        return {"orth_policy": "every"}
    head, _, arg = text.partition(":")
    if head == "every" and arg:
        return {"orth_policy": "periodic", "orth_period": int(arg)}
    if head == "adaptive":
        return {"orth_policy": "adaptive", "orth_threshold": float(arg) if arg else 0.1}
    raise _CliError(f"bad --orth-policy {text!r} (use every | every:T | adaptive[:THRESHOLD])")


def _parse_orth_scheme(text):
    head, _, arg = text.partition(":")
    if head == "cholesky-qr":
        return {"orth_scheme": "cholesky-qr"}
    if head == "taylor-polar":
        out = {"orth_scheme": "taylor-polar"}
        if arg:
            out["taylor_terms"] = int(arg)
        return out
    raise _CliError(f"bad --orth-scheme {text!r} (use cholesky-qr | taylor-polar[:TERMS])")


def _add_solver_flags(p):
    p.add_argument("--problem", required=True, help="mm:<path> | lap1d:<n> | lap3d:<nx,ny,nz> | well:<nx,ny,nz,depth> | rand:<n,density>")
    p.add_argument("--k", type=int, required=True, help="number of wanted eigenpairs")
    p.add_argument("--nbuf", type=int, default=None, help="buffer columns (default: 2%% of k)")
    p.add_argument("--sbsize", type=int, default=5)
    p.add_argument("--rr-period", default="5", help="iterations between Rayleigh-Ritz passes, or 'inf'")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--trace-tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--orth-policy", default="every")
    p.add_argument("--orth-scheme", default="cholesky-qr")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precond", default="none", help="none | jacobi | jacobi:<shift>")
    p.add_argument("--restart-dim-multiple", type=int, default=2, help="davidson subspace cap, as a multiple of k+nbuf")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--json", action="store_true", help="also write a JSON mirror of each trace")


def _build_parser():
    parser = _Parser(prog="blockeig", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run one solver")
    ps.add_argument("--solver", choices=_SOLVERS, required=True)
    _add_solver_flags(ps)
    ps.add_argument("--trace-out", default=None, help="trace CSV path")
    ps.add_argument("--plot-out", default=None, help="convergence SVG path")

    pc = sub.add_parser("compare", help="run several solvers on one problem")
    pc.add_argument("--solvers", required=True, help="comma-separated list, at least two")
    _add_solver_flags(pc)
    pc.add_argument("--trace-out", default=None, help="prefix for per-solver trace CSVs")
    pc.add_argument("--plot-out", default=None, help="multi-series convergence SVG path")

    pp = sub.add_parser("plot", help="plot existing trace files")
    pp.add_argument("traces", nargs="+", help="trace CSV paths")
    pp.add_argument("--out", required=True, help="output SVG path")
    pp.add_argument("--x", choices=("iter", "time"), default="iter")
    return parser


def _validate_common(args):
    if args.k < 1:
        raise _CliError("--k must be >= 1")
    if args.nbuf is not None and args.nbuf < 0:
        raise _CliError("--nbuf must be >= 0")
    if args.sbsize < 1:
        raise _CliError("--sbsize must be >= 1")
    if args.tol <= 0:
        raise _CliError("--tol must be positive")
    if args.max_iter < 1:
        raise _CliError("--max-iter must be >= 1")
    if args.threads < 1:
        raise _CliError("--threads must be >= 1")
    if args.rr_period == "inf":
        rr = math.inf
    else:
        try:
            rr = int(args.rr_period)
        except ValueError:
            raise _CliError("--rr-period must be an integer or 'inf'") from None
        if rr < 1:
            raise _CliError("--rr-period must be >= 1")
    return rr


def _build_preconditioner(spec, operator):
    if spec == "none":
        return None
    head, _, arg = spec.partition(":")
    if head == "jacobi":
        shift = float(arg) if arg else 0.0
        return jacobi_preconditioner(operator, shift)
    raise _CliError(f"bad --precond {spec!r} (use none | jacobi[:shift])")


def _run_one(solver, a, t, x0, args, rr_period):
    if solver == "ppcg":
        opts = SolverOptions(
            k=args.k,
            nbuf=args.nbuf,
            sbsize=args.sbsize,
            rr_period=rr_period,
            tol=args.tol,
            trace_tol=args.trace_tol,
            max_iter=args.max_iter,
            seed=args.seed,
            **_parse_orth_policy(args.orth_policy),
            **_parse_orth_scheme(args.orth_scheme),
        )
        return ppcg_solve(a, t, x0=x0, opts=opts, threads=args.threads)
    opts = BaselineOptions(
        k=args.k,
        nbuf=args.nbuf,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        restart_dim_multiple=args.restart_dim_multiple,
    )
    solve = davidson_solve if solver == "davidson" else lobpcg_solve
    return solve(a, t, x0=x0, opts=opts, threads=args.threads)


def _summary_lines(solver, report):
    lines = [
        f"solver: {solver}",
        f"status: {report.status}",
        f"iterations: {report.iterations}",
        f"matvecs: {report.matvecs}",
        f"rr_solves: {report.rr_count}",
        f"wall_ms: {report.wall_ms:.3f}",
        "eigenvalues:",
    ]
    for v in report.values:
        lines.append(f"  {float(v)!r}")
    return lines


def _write_outputs(report, trace_path, plot_path, want_json, label):
    if trace_path:
        _atomic_write(trace_path, trace_to_csv(report.trace))
        if want_json:
            _atomic_write(f"{trace_path}.json", trace_to_json(report.trace))
    if plot_path:
        series = [(label, [r.iteration for r in report.trace], [r.rel_resid for r in report.trace])]
        _atomic_write(plot_path, render_convergence_svg(series))


def _cmd_solve(args):
    rr_period = _validate_common(args)
    a = _parse_problem(args.problem, args.seed)
    t = _build_preconditioner(args.precond, a)
    report = _run_one(args.solver, a, t, None, args, rr_period)
    _write_outputs(report, args.trace_out, args.plot_out, args.json, args.solver)
    print("\n".join(_summary_lines(args.solver, report)))
    return 0 if report.status == "converged" else 2


def _cmd_compare(args):
    rr_period = _validate_common(args)
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    if len(solvers) < 2:
        raise _CliError("--solvers needs at least two entries")
    for s in solvers:
        if s not in _SOLVERS:
            raise _CliError(f"unknown solver {s!r}")
    a = _parse_problem(args.problem, args.seed)
    t = _build_preconditioner(args.precond, a)

    # one shared initial guess: identical starting point for every solver
    nbuf = args.nbuf if args.nbuf is not None else math.ceil(0.02 * args.k)
    rng = np.random.default_rng(args.seed)
    x0 = rng.standard_normal((a.n, args.k + nbuf))
    if np.issubdtype(np.dtype(a.dtype), np.complexfloating):
        x0 = x0 + 1j * rng.standard_normal(x0.shape)

    reports = []
    for idx, s in enumerate(solvers):
        report = _run_one(s, a, t, x0, args, rr_period)
        reports.append((s, report))
        if args.trace_out:
            path = f"{args.trace_out}{s}{idx}.csv" if solvers.count(s) > 1 else f"{args.trace_out}{s}.csv"
            _atomic_write(path, trace_to_csv(report.trace))
            if args.json:
                _atomic_write(f"{path}.json", trace_to_json(report.trace))

    header = f"{'solver':<10} {'status':<10} {'iters':>6} {'matvecs':>8} {'rr':>5} {'wall_ms':>10} {'final_resid':>12}"
    print(header)
    for s, rep in reports:
        final = rep.trace[-1].rel_resid if rep.trace else 0.0
        print(
            f"{s:<10} {rep.status:<10} {rep.iterations:>6} {rep.matvecs:>8} "
            f"{rep.rr_count:>5} {rep.wall_ms:>10.2f} {final:>12.3e}"
        )
    if args.plot_out:
        series = [
            (s, [r.iteration for r in rep.trace], [r.rel_resid for r in rep.trace])
            for s, rep in reports
            if rep.trace
        ]
        _atomic_write(args.plot_out, render_convergence_svg(series))
    if any(rep.status == "max_iter" for _, rep in reports):
        return 2
    return 0


def _cmd_plot(args):
    series = []
    for path in args.traces:
        records = parse_trace_csv(path)
        if not records:
            raise _CliError(f"trace file {path} has no records")
        label = os.path.splitext(os.path.basename(path))[0]
        xs = [r.iteration for r in records] if args.x == "iter" else [r.wall_ms for r in records]
        series.append((label, xs, [r.rel_resid for r in records]))
    x_label = "iteration" if args.x == "iter" else "wall time (ms)"
    _atomic_write(args.out, render_convergence_svg(series, x_label=x_label))
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_plot(args)
    except (_CliError, BlockeigError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
