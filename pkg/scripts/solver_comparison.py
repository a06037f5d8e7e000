#!/usr/bin/env python3
"""Head-to-head solver comparison on the 1-D Laplacian benchmark.

Runs PPCG, Davidson-Liu and LOBPCG on laplacian_1d(2000) for the 20 lowest
eigenpairs with a Jacobi preconditioner, printing a timing table and the
largest deviation from the analytic spectrum.
"""

import argparse
import sys

import numpy as np

sys.path.insert(0, "src")

from blockeig.baselines import BaselineOptions, davidson_solve, lobpcg_solve
from blockeig.plotting import render_convergence_svg
from blockeig.ppcg import SolverOptions, ppcg_solve
from blockeig.problems import jacobi_preconditioner, laplacian_1d


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="solver_comparison.svg")
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--k", type=int, default=20)
    args = parser.parse_args()

    n, k = args.n, args.k
    a = laplacian_1d(n)
    t = jacobi_preconditioner(a)
    analytic = 2.0 - 2.0 * np.cos(np.arange(1, k + 1) * np.pi / (n + 1))
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal((n, k + 20))

    runs = [
        ("ppcg", lambda: ppcg_solve(
            a, t, x0=x0, opts=SolverOptions(k=k, nbuf=20, tol=1e-6, seed=0, max_iter=2500)
        )),
        ("davidson", lambda: davidson_solve(
            a, t, x0=x0,
            opts=BaselineOptions(k=k, nbuf=20, tol=1e-6, seed=0, max_iter=2500, restart_dim_multiple=6),
        )),
        ("lobpcg", lambda: lobpcg_solve(
            a, t, x0=x0, opts=BaselineOptions(k=k, nbuf=20, tol=1e-6, seed=0, max_iter=2500)
        )),
    ]
    print(f"{'solver':<10} {'status':<10} {'iters':>6} {'matvecs':>8} {'rr':>5} {'wall_s':>8} {'max_err':>10}")
    series = []
    for name, run in runs:
        rep = run()
        err = float(np.max(np.abs(rep.values - analytic)))
        print(
            f"{name:<10} {rep.status:<10} {rep.iterations:>6} {rep.matvecs:>8} "
            f"{rep.rr_count:>5} {rep.wall_ms / 1e3:>8.2f} {err:>10.2e}"
        )
        series.append((name, [r.iteration for r in rep.trace], [r.rel_resid for r in rep.trace]))

    with open(args.out, "w") as fh:
        fh.write(render_convergence_svg(series, title=f"laplacian_1d({n}), k={k}"))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
