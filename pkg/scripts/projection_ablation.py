#!/usr/bin/env python3
"""Projection ablation on the clustered double-well problem.

Runs PPCG with both search-direction projections enabled, then with the W
projection and the P projection disabled in turn.  The full-projection run
is the registered baseline for the acceptance suite: its iteration count
to reach a 1e-4 relative subspace residual is the golden reference.
"""

import argparse
import sys

sys.path.insert(0, "src")

from blockeig.plotting import render_convergence_svg
from blockeig.ppcg import SolverOptions, ppcg_solve
from blockeig.problems import jacobi_preconditioner, well_problem

BASE = dict(k=10, nbuf=2, sbsize=5, rr_period=5, tol=1e-4, seed=1)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="projection_ablation.svg")
    parser.add_argument("--max-iter", type=int, default=400)
    args = parser.parse_args()

    a = well_problem(8, 8, 8, depth=80.0, seed=3)
    t = jacobi_preconditioner(a, shift=-90.0)

    variants = [
        ("both projections", {}),
        ("no W projection", {"project_w": False}),
        ("no P projection", {"project_p": False}),
    ]
    series = []
    for label, extra in variants:
        rep = ppcg_solve(a, t, opts=SolverOptions(max_iter=args.max_iter, **BASE, **extra))
        last = rep.trace[-1].rel_resid if rep.trace else 0.0
        print(f"{label:18s} status={rep.status:9s} iters={rep.iterations:4d} last_resid={last:.3e}")
        series.append((label, [r.iteration for r in rep.trace], [r.rel_resid for r in rep.trace]))

    with open(args.out, "w") as fh:
        fh.write(render_convergence_svg(series, title="projection ablation, double-well 8x8x8"))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
