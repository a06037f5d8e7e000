"""Reference solvers: the simplest Davidson-Liu iteration and LOBPCG.

Both share the kernels, locking rules and report schema of the PPCG
solver so head-to-head comparisons measure algorithmic differences only.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .core import SmallPencil, block_inner, cholesky_qr, solve_pencil
from .errors import DimensionError, RankDeficiencyError
from .operators import CountingOperator
from .ppcg import SolveReport, _initial_block, block_update
from .rayleigh_ritz import RitzResult, convergence_metrics, detect_converged
from .trace import TraceRecord

__all__ = ["BaselineOptions", "davidson_solve", "lobpcg_solve"]


@dataclass
class BaselineOptions:
    """Tunables shared by the reference solvers.

    ``restart_dim_multiple`` caps the Davidson trial subspace at that
    multiple of k + nbuf columns before a thick restart; LOBPCG ignores it.
    """

    k: int
    nbuf: int | None = None
    tol: float = 1e-6
    max_iter: int = 500
    seed: int = 0
    restart_dim_multiple: int = 2

    def resolved_nbuf(self):
        if self.nbuf is not None:
            return self.nbuf
        return math.ceil(0.02 * self.k)

    def validate(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.nbuf is not None and self.nbuf < 0:
            raise ValueError("nbuf must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.restart_dim_multiple < 2:
            raise ValueError("restart_dim_multiple must be >= 2")


def _expand_orthonormal(basis, w):
    """Orthogonalize w against the basis and itself, dropping dependent columns."""
    for _ in range(2):  # two projection passes keep the basis clean
        w = w - basis @ block_inner(basis, w)
    norms = np.linalg.norm(w, axis=0)
    w = w[:, norms > 1e-12 * max(np.max(norms), 1e-300)]
    while w.shape[1]:
        try:
            w, _ = cholesky_qr(w)
            break
        except RankDeficiencyError as err:
            w = np.delete(w, err.column, axis=1)
    return w


def davidson_solve(a, t=None, x0=None, opts=None, threads=1):
    """Simplest Davidson-Liu iteration with subspace accumulation.

    Each step appends the preconditioned Ritz residual block to the trial
    basis and extracts new Ritz pairs; the basis is thick-restarted to the
    current Ritz block when it would exceed the configured cap.  One
    operator application per iteration (on the new directions only).
    """
    if opts is None:
        raise ValueError("opts is required")
    opts.validate()
    with threadpool_limits(limits=1):
        return _davidson_solve(a, t, x0, opts)


def _davidson_solve(a, t, x0, opts):
    a = CountingOperator(a)
    k_want = opts.k
    k_total = k_want + opts.resolved_nbuf()
    if k_total > a.n:
        raise DimensionError(f"k + nbuf = {k_total} exceeds operator dimension {a.n}")
    cap = opts.restart_dim_multiple * k_total

    t_start = time.perf_counter()
    x = _initial_block(a, x0, k_total, opts.seed)
    ax = a.apply(x)
    basis, a_basis = x, ax
    # the projected pencil blocks grow with the basis; keep them cached and
    # extend instead of recomputing dim^2-sized products every iteration
    g_a = block_inner(basis, a_basis)
    g_b = block_inner(basis, basis)
    theta = None  # Ritz values appear after the first extraction

    trace = []
    values_history = []
    prev_trace_value = None
    status = "max_iter"
    iterations = opts.max_iter
    n_locked = 0
    rr_count = 0

    for it in range(1, opts.max_iter + 1):
        metrics = convergence_metrics(x[:, :k_want], ax[:, :k_want], prev_trace_value)
        prev_trace_value = metrics.trace_value
        if metrics.rel_subspace_residual <= opts.tol or n_locked >= k_total:
            status = "converged"
            iterations = it - 1
            break
        trace.append(
            TraceRecord(
                iteration=it,
                trace_value=metrics.trace_value,
                rel_resid=metrics.rel_subspace_residual,
                n_locked=n_locked,
                n_matvec=a.matvecs,
                wall_ms=(time.perf_counter() - t_start) * 1e3,
            )
        )

        if theta is None:
            # first step: X is not yet a Ritz basis, use the generalized form
            resid = ax - x @ block_inner(x, ax)
        else:
            resid = ax[:, n_locked:] - x[:, n_locked:] * theta[None, n_locked:]
        w = t.apply(resid) if t is not None else resid
        if basis.shape[1] + w.shape[1] > cap:
            # thick restart to the current Ritz block
            basis, a_basis = x, ax
            g_a = block_inner(basis, a_basis)
            g_b = block_inner(basis, basis)
        w = _expand_orthonormal(basis, w)
        if w.shape[1]:
            aw = a.apply(w)
            cross_a = block_inner(basis, aw)
            cross_b = block_inner(basis, w)
            g_a = np.block([[g_a, cross_a], [cross_a.conj().T, block_inner(w, aw)]])
            g_b = np.block([[g_b, cross_b], [cross_b.conj().T, block_inner(w, w)]])
            basis = np.concatenate([basis, w], axis=1)
            a_basis = np.concatenate([a_basis, aw], axis=1)

        sol = solve_pencil(SmallPencil(g_a, g_b), k_total)
        theta = sol.omega
        x, ax = basis @ sol.c, a_basis @ sol.c
        rr_count += 1
        values_history.append(theta.copy())

        resid_norms = np.linalg.norm(ax - x * theta[None, :], axis=0)
        ritz = RitzResult(theta, x, resid_norms)
        n_locked = len(detect_converged(ritz, opts.tol))

    if theta is None:
        # converged before any expansion: extract once for the report
        sol = solve_pencil(SmallPencil(g_a, g_b), k_total)
        theta = sol.omega
        x, ax = x @ sol.c, ax @ sol.c
        rr_count += 1
    wall_ms = (time.perf_counter() - t_start) * 1e3
    resid_norms = np.linalg.norm(ax - x * theta[None, :], axis=0)
    return SolveReport(
        values=theta[:k_want],
        vectors=x[:, :k_want],
        trace=trace,
        status=status,
        iterations=iterations,
        matvecs=a.matvecs,
        rr_count=rr_count,
        breakdown_recoveries=0,
        wall_ms=wall_ms,
        values_history=values_history,
        diagnostics={"final_residual_norms": resid_norms[:k_want].tolist()},
    )


def lobpcg_solve(a, t=None, x0=None, opts=None, threads=1):
    """Locally optimal block preconditioned conjugate gradient.

    Per iteration the full projected pencil over [X, W, P] is solved for
    the smallest pairs; the same projected search-direction construction
    as the PPCG solver is used, so a whole-block PPCG run with a
    Rayleigh-Ritz pass every iteration follows the same trajectory.
    """
    if opts is None:
        raise ValueError("opts is required")
    opts.validate()
    with threadpool_limits(limits=1):
        return _lobpcg_solve(a, t, x0, opts)


def _lobpcg_solve(a, t, x0, opts):
    a = CountingOperator(a)
    k_want = opts.k
    k_total = k_want + opts.resolved_nbuf()
    if k_total > a.n:
        raise DimensionError(f"k + nbuf = {k_total} exceeds operator dimension {a.n}")

    t_start = time.perf_counter()
    x = _initial_block(a, x0, k_total, opts.seed)
    ax = a.apply(x)
    empty = np.zeros((a.n, 0), dtype=x.dtype)
    x_lock, ax_lock = empty, empty
    values_lock = np.zeros(0)
    theta = None
    p = ap = None

    trace = []
    values_history = []
    prev_trace_value = None
    status = "max_iter"
    iterations = opts.max_iter
    recoveries = 0
    rr_count = 0

    def leading(k):
        if x_lock.shape[1] >= k:
            return x_lock[:, :k], ax_lock[:, :k]
        need = k - x_lock.shape[1]
        return (
            np.concatenate([x_lock, x[:, :need]], axis=1),
            np.concatenate([ax_lock, ax[:, :need]], axis=1),
        )

    for it in range(1, opts.max_iter + 1):
        x_lead, ax_lead = leading(k_want)
        metrics = convergence_metrics(x_lead, ax_lead, prev_trace_value)
        prev_trace_value = metrics.trace_value
        if metrics.rel_subspace_residual <= opts.tol or x.shape[1] == 0:
            status = "converged"
            iterations = it - 1
            break
        trace.append(
            TraceRecord(
                iteration=it,
                trace_value=metrics.trace_value,
                rel_resid=metrics.rel_subspace_residual,
                n_locked=x_lock.shape[1],
                n_matvec=a.matvecs,
                wall_ms=(time.perf_counter() - t_start) * 1e3,
            )
        )

        if theta is None:
            w = ax - x @ block_inner(x, ax)
        else:
            w = ax - x * theta[None, :]
        w = t.apply(w) if t is not None else w
        aw = a.apply(w)
        for basis, a_cache in ((x, ax), (x_lock, ax_lock)):
            if basis.shape[1]:
                g = block_inner(basis, w)
                w -= basis @ g
                aw -= a_cache @ g
                if p is not None:
                    gp = block_inner(basis, p)
                    p -= basis @ gp
                    ap -= a_cache @ gp

        res = block_update(x, w, p, ax=ax, aw=aw, ap=ap)
        recoveries += int(res.used_fallback)
        theta = res.theta
        ap_new = np.zeros_like(res.p)
        if res.c_w.shape[0]:
            ap_new += aw @ res.c_w
        if res.c_p.shape[0] and ap is not None:
            ap_new += ap @ res.c_p
        ax = ax @ res.c_x + ap_new
        x, p, ap = res.x, res.p, ap_new
        rr_count += 1
        values_history.append(np.concatenate([values_lock, theta]))

        resid_norms = np.linalg.norm(ax - x * theta[None, :], axis=0)
        ritz = RitzResult(theta, x, resid_norms)
        newly = len(detect_converged(ritz, opts.tol))
        if newly:
            x_lock = np.concatenate([x_lock, x[:, :newly]], axis=1)
            ax_lock = np.concatenate([ax_lock, ax[:, :newly]], axis=1)
            values_lock = np.concatenate([values_lock, theta[:newly]])
            x, ax = x[:, newly:], ax[:, newly:]
            theta = theta[newly:]
            p, ap = p[:, newly:], ap[:, newly:]

    if theta is None:
        # converged before the first update: extract once for the report
        sol = solve_pencil(SmallPencil(block_inner(x, ax), block_inner(x, x)), k_total)
        theta = sol.omega
        x, ax = x @ sol.c, ax @ sol.c
        rr_count += 1
    wall_ms = (time.perf_counter() - t_start) * 1e3
    values = np.concatenate([values_lock, theta])
    vectors = np.concatenate([x_lock, x], axis=1)
    a_vectors = np.concatenate([ax_lock, ax], axis=1)
    resid_norms = np.linalg.norm(a_vectors - vectors * values[None, :], axis=0)
    return SolveReport(
        values=values[:k_want],
        vectors=vectors[:, :k_want],
        trace=trace,
        status=status,
        iterations=iterations,
        matvecs=a.matvecs,
        rr_count=rr_count,
        breakdown_recoveries=recoveries,
        wall_ms=wall_ms,
        values_history=values_history,
        diagnostics={"final_residual_norms": resid_norms[:k_want].tolist()},
    )
