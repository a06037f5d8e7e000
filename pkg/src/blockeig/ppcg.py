"""Projected preconditioned conjugate gradient (PPCG) block eigensolver.

One outer iteration preconditions and projects the block residual, updates
each column subblock through an independent small projected eigenproblem,
and re-orthonormalizes.  A full Rayleigh-Ritz pass runs only every
``rr_period`` iterations; that is where Ritz values are extracted and
converged columns are locked.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from threadpoolctl import threadpool_limits

from .core import SmallPencil, block_inner, check_finite, cholesky_qr, polar_correction, solve_pencil
from .errors import DimensionError, RankDeficiencyError, SingularGramError
from .operators import CountingOperator
from .rayleigh_ritz import RitzResult, convergence_metrics, detect_converged
from .trace import TraceRecord

__all__ = [
    "SolverOptions",
    "SolverState",
    "SolveReport",
    "BlockUpdateResult",
    "split_blocks",
    "block_update",
    "fallback_steepest_descent",
    "lock_and_compact",
    "ppcg_solve",
]

# Columns whose coefficient block loses rank below this relative floor
# trigger the steepest-descent fallback.
_CX_RANK_FLOOR = 1e-14
# Pencil solutions healthy in the unit-normalized basis have entries near 1;
# beyond this scale the cached operator products are refreshed.
_COEFF_REFRESH = 100.0
# Direction columns with norm below this (relative to the block scale) are
# dropped before assembling the small pencil.
_DIRECTION_FLOOR = 1e-14


@dataclass
class SolverOptions:
    """Tunables of the PPCG iteration.

    ``rr_period`` may be ``math.inf`` to disable the periodic Rayleigh-Ritz
    pass entirely.  ``orth_policy`` is "every", "periodic" (every
    ``orth_period`` iterations) or "adaptive" (only when the measured loss
    of orthonormality exceeds ``orth_threshold``).  ``orth_scheme`` selects
    "cholesky-qr" or "taylor-polar" (the latter falls back to Cholesky QR
    outside its applicability region).  ``project_w`` / ``project_p`` exist
    to switch the search-direction projections off in ablation experiments;
    production runs keep both on.
    """

    k: int
    nbuf: int | None = None
    sbsize: int = 5
    rr_period: float = 5
    tol: float = 1e-6
    trace_tol: float | None = None
    max_iter: int = 500
    orth_policy: str = "every"
    orth_period: int = 1
    orth_threshold: float = 0.1
    orth_scheme: str = "cholesky-qr"
    taylor_terms: int = 4
    seed: int = 0
    project_w: bool = True
    project_p: bool = True

    def resolved_nbuf(self):
        if self.nbuf is not None:
            return self.nbuf
        return math.ceil(0.02 * self.k)

    def validate(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.nbuf is not None and self.nbuf < 0:
            raise ValueError("nbuf must be >= 0")
        if self.sbsize < 1:
            raise ValueError("sbsize must be >= 1")
        if not (self.rr_period >= 1):
            raise ValueError("rr_period must be >= 1 (math.inf disables RR)")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.trace_tol is not None and self.trace_tol <= 0:
            raise ValueError("trace_tol must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.orth_policy not in ("every", "periodic", "adaptive"):
            raise ValueError(f"unknown orth_policy {self.orth_policy!r}")
        if self.orth_period < 1:
            raise ValueError("orth_period must be >= 1")
        if self.orth_scheme not in ("cholesky-qr", "taylor-polar"):
            raise ValueError(f"unknown orth_scheme {self.orth_scheme!r}")


@dataclass
class SolverState:
    """Blocks and bookkeeping of one PPCG run.

    Locked columns always occupy the leading positions of the global column
    ordering; ``x`` holds only the active (trailing) columns.  ``ax`` style
    fields cache the operator applied to the corresponding block.
    """

    x: np.ndarray
    w: np.ndarray
    p: np.ndarray | None
    x_lock: np.ndarray
    values_lock: np.ndarray
    iteration: int
    partition: list
    sbsize: int
    ax: np.ndarray | None = None
    ax_lock: np.ndarray | None = None
    aw: np.ndarray | None = None
    ap: np.ndarray | None = None

    @property
    def n_locked(self):
        return self.x_lock.shape[1]

    @property
    def k_act(self):
        return self.x.shape[1]

    @property
    def k_total(self):
        return self.n_locked + self.k_act

    @property
    def j_lock(self):
        return list(range(self.n_locked))

    @property
    def j_act(self):
        return list(range(self.n_locked, self.k_total))


@dataclass
class SolveReport:
    """Final eigenpair approximations plus the full convergence record."""

    values: np.ndarray
    vectors: np.ndarray = field(repr=False)
    trace: list
    status: str
    iterations: int
    matvecs: int
    rr_count: int
    breakdown_recoveries: int
    wall_ms: float
    values_history: list = field(default_factory=list, repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)


@dataclass
class BlockUpdateResult:
    """Updated subblock, its conjugate directions, and the mixing coefficients.

    ``c_w`` and ``c_p`` rows align with the original W / P columns (zero
    rows for dropped directions) so cached products can be updated by the
    same linear combination.  ``theta`` holds the subblock Ritz values.
    ``coeff_scale`` is the magnitude of the pencil solution in the
    unit-normalized direction basis; values far above 1 flag an
    ill-conditioned pencil whose combinations amplify round-off.
    """

    x: np.ndarray
    p: np.ndarray
    theta: np.ndarray
    c_x: np.ndarray
    c_w: np.ndarray
    c_p: np.ndarray
    used_fallback: bool = False
    zero_residual: bool = False
    coeff_scale: float = 1.0


def split_blocks(k_act, sbsize):
    """Contiguous column ranges of width sbsize; the last may be narrower."""
    if k_act < 0:
        raise ValueError("k_act must be >= 0")
    if sbsize < 1:
        raise ValueError("sbsize must be >= 1")
    return [(lo, min(lo + sbsize, k_act)) for lo in range(0, k_act, sbsize)]


def _kept_columns(block, scale):
    """Indices of columns with norm above the drop floor."""
    if block is None or block.shape[1] == 0:
        return np.array([], dtype=int)
    norms = np.linalg.norm(block, axis=0)
    return np.nonzero(norms > _DIRECTION_FLOOR * scale)[0]


def _solve_subblock_pencil(parts, a_parts, want):
    """Assemble [X | W | P] and solve the small projected pencil."""
    s = np.concatenate(parts, axis=1)
    a_s = np.concatenate(a_parts, axis=1)
    pencil = SmallPencil(block_inner(s, a_s), block_inner(s, s))
    return solve_pencil(pencil, want)


def _rayleigh_quotients(x, ax):
    num = np.real(np.sum(x.conj() * ax, axis=0))
    den = np.real(np.sum(x.conj() * x, axis=0))
    return num / den


def _unit_columns(block, kept):
    """Kept columns scaled to unit norm, plus the scaling factors.

    Keeps the small Gram matrix well conditioned when the search
    directions shrink near convergence; the span is unchanged.
    """
    cols = block[:, kept]
    norms = np.linalg.norm(cols, axis=0)
    return cols / norms[None, :], norms


def fallback_steepest_descent(x, w, a=None, ax=None, aw=None):
    """Recompute one subblock over span{X, W} only, excluding P.

    Used when the coefficient block on X lost rank; with an HPD
    preconditioner upstream the recomputed update is full rank whenever the
    residual columns are nonzero.  Columns with no usable W direction pass
    through unchanged (they are picked up as converged at the next
    Rayleigh-Ritz pass).
    """
    if ax is None:
        ax = a.apply(x)
    if aw is None and w is not None and w.shape[1] > 0:
        aw = a.apply(w)
    q = x.shape[1]
    scale = max(np.max(np.linalg.norm(x, axis=0)), 1e-300)
    kept_w = _kept_columns(w, scale)
    zero_resid = kept_w.size == 0
    if zero_resid:
        return BlockUpdateResult(
            x=x.copy(),
            p=np.zeros_like(x),
            theta=_rayleigh_quotients(x, ax),
            c_x=np.eye(q, dtype=x.dtype),
            c_w=np.zeros((0 if w is None else w.shape[1], q), dtype=x.dtype),
            c_p=np.zeros((0, q), dtype=x.dtype),
            used_fallback=True,
            zero_residual=True,
        )
    w_unit, w_norms = _unit_columns(w, kept_w)
    aw_unit = aw[:, kept_w] / w_norms[None, :]
    sol = _solve_subblock_pencil([x, w_unit], [ax, aw_unit], q)
    c_x = sol.c[:q]
    c_w = np.zeros((w.shape[1], q), dtype=sol.c.dtype)
    c_w[kept_w] = sol.c[q:] / w_norms[:, None]
    p_new = w @ c_w
    return BlockUpdateResult(
        x=x @ c_x + p_new,
        p=p_new,
        theta=sol.omega,
        c_x=c_x,
        c_w=c_w,
        c_p=np.zeros((0, q), dtype=sol.c.dtype),
        used_fallback=True,
        coeff_scale=float(np.max(np.abs(sol.c))),
    )


def block_update(x, w, p=None, a=None, ax=None, aw=None, ap=None, force_fallback=False):
    """One subblock update: minimize the trace over span{X_j, W_j, P_j}.

    Solves the projected pencil over the assembled directions for the q
    smallest pairs and recombines: P_j <- W_j C_W + P_j C_P followed by
    X_j <- X_j C_X + P_j.  Linearly dependent directions are dropped (P
    first, then offending W columns); a rank-deficient C_X triggers
    fallback_steepest_descent for this subblock only.
    """
    if ax is None:
        ax = a.apply(x)
    if aw is None and w is not None and w.shape[1] > 0:
        aw = a.apply(w)
    if ap is None and p is not None and p.shape[1] > 0:
        ap = a.apply(p)
    if force_fallback:
        return fallback_steepest_descent(x, w, ax=ax, aw=aw)

    q = x.shape[1]
    scale = max(np.max(np.linalg.norm(x, axis=0)), 1e-300)
    kept_w = _kept_columns(w, scale)
    kept_p = _kept_columns(p, scale)
    if kept_w.size == 0 and kept_p.size == 0:
        # Degenerate pencil: no usable search directions.
        return BlockUpdateResult(
            x=x.copy(),
            p=np.zeros_like(x),
            theta=_rayleigh_quotients(x, ax),
            c_x=np.eye(q, dtype=x.dtype),
            c_w=np.zeros((0 if w is None else w.shape[1], q), dtype=x.dtype),
            c_p=np.zeros((0 if p is None else p.shape[1], q), dtype=x.dtype),
            zero_residual=kept_w.size == 0,
        )

    def attempt(kw, kp):
        parts = [x]
        a_parts = [ax]
        scales = []
        if kw.size:
            w_unit, w_norms = _unit_columns(w, kw)
            parts.append(w_unit)
            a_parts.append(aw[:, kw] / w_norms[None, :])
            scales.append(w_norms)
        else:
            scales.append(np.zeros(0))
        if kp.size:
            p_unit, p_norms = _unit_columns(p, kp)
            parts.append(p_unit)
            a_parts.append(ap[:, kp] / p_norms[None, :])
            scales.append(p_norms)
        else:
            scales.append(np.zeros(0))
        return _solve_subblock_pencil(parts, a_parts, q), scales

    kept_p_used = kept_p
    try:
        sol, (w_norms, p_norms) = attempt(kept_w, kept_p_used)
    except SingularGramError:
        # Drop the conjugate block first; it carries the least information.
        kept_p_used = np.array([], dtype=int)
        kw = kept_w.copy()
        sol = None
        while sol is None:
            try:
                sol, (w_norms, p_norms) = attempt(kw, kept_p_used)
            except SingularGramError:
                if kw.size == 0:
                    raise
                # Shed the weakest remaining W column and retry.
                norms = np.linalg.norm(w[:, kw], axis=0)
                kw = np.delete(kw, int(np.argmin(norms)))
        kept_w = kw

    nw = kept_w.size
    c_x = sol.c[:q]
    sv = np.linalg.svd(c_x, compute_uv=False)
    c_scale = np.linalg.norm(sol.c, 2)
    if sv[-1] < _CX_RANK_FLOOR * max(c_scale, 1.0):
        return fallback_steepest_descent(x, w, ax=ax, aw=aw)

    c_w = np.zeros((0 if w is None else w.shape[1], q), dtype=sol.c.dtype)
    if nw:
        c_w[kept_w] = sol.c[q:q + nw] / w_norms[:, None]
    c_p = np.zeros((0 if p is None else p.shape[1], q), dtype=sol.c.dtype)
    if kept_p_used.size:
        c_p[kept_p_used] = sol.c[q + nw:] / p_norms[:, None]

    p_new = np.zeros((x.shape[0], q), dtype=np.result_type(x.dtype, sol.c.dtype))
    if nw:
        p_new = w @ c_w
    if kept_p_used.size:
        p_new = p_new + p @ c_p
    return BlockUpdateResult(
        x=x @ c_x + p_new,
        p=p_new,
        theta=sol.omega,
        c_x=c_x,
        c_w=c_w,
        c_p=c_p,
        coeff_scale=float(np.max(np.abs(sol.c))),
    )


def lock_and_compact(state, ritz, tol, residual=None):
    """Split freshly extracted Ritz data into locked and active parts.

    ``ritz`` must hold the full reassembled block (previously locked plus
    active columns).  Converged leading columns move to ``x_lock``; W and P
    keep only active columns, with P realigned by global column position
    (a column that re-activates restarts with no conjugate history).
    """
    n_locked_old = state.n_locked
    k_total = ritz.vectors.shape[1]
    n_locked_new = len(detect_converged(ritz, tol))

    state.x_lock = ritz.vectors[:, :n_locked_new]
    state.values_lock = ritz.values[:n_locked_new]
    state.x = ritz.vectors[:, n_locked_new:]
    if residual is not None:
        state.w = residual[:, n_locked_new:]

    if state.p is not None:
        k_act_new = k_total - n_locked_new
        p_new = np.zeros((state.p.shape[0], k_act_new), dtype=state.p.dtype)
        ap_new = np.zeros_like(p_new) if state.ap is not None else None
        for g in range(max(n_locked_old, n_locked_new), k_total):
            p_new[:, g - n_locked_new] = state.p[:, g - n_locked_old]
            if ap_new is not None:
                ap_new[:, g - n_locked_new] = state.ap[:, g - n_locked_old]
        state.p = p_new
        state.ap = ap_new

    state.partition = split_blocks(state.k_act, state.sbsize)
    return state


def _initial_block(a, x0, k_total, seed):
    n = a.n
    complex_field = np.issubdtype(np.dtype(a.dtype), np.complexfloating)
    dtype = np.complex128 if complex_field else np.float64
    rng = np.random.default_rng(seed)

    def draw(cols):
        block = rng.standard_normal((n, cols))
        if complex_field:
            block = block + 1j * rng.standard_normal((n, cols))
        return block

    if x0 is None:
        x = draw(k_total).astype(dtype)
    else:
        x0 = np.asarray(x0, dtype=dtype)
        if x0.ndim != 2 or x0.shape[0] != n:
            raise DimensionError(f"x0 must be {n} x m, got {x0.shape}")
        if x0.shape[1] > k_total:
            raise DimensionError(f"x0 has {x0.shape[1]} columns, at most k + nbuf = {k_total} allowed")
        check_finite(x0, "x0")
        pad = k_total - x0.shape[1]
        x = np.column_stack([x0, draw(pad).astype(dtype)]) if pad else x0.copy()
    q, _ = cholesky_qr(x)
    return q


def _apply_projection(basis, a_basis, block, a_block):
    g = block_inner(basis, block)
    block -= basis @ g
    if a_block is not None:
        a_block -= a_basis @ g


def _orth_loss(state):
    """Frobenius deviation of the joint [X_lock, X] Gram matrix from identity."""
    s_full = np.concatenate([state.x_lock, state.x], axis=1)
    gram_full = block_inner(s_full, s_full)
    loss = float(np.linalg.norm(gram_full - np.eye(s_full.shape[1]), "fro"))
    return loss, gram_full[state.n_locked:, state.n_locked:]


def _redo_subblock_without_p(state, prev_blocks, column):
    """Recompute the subblock owning ``column`` with the P-free fallback."""
    x0, w0, p0, ax0, aw0, ap0 = prev_blocks
    for lo, hi in state.partition:
        if lo <= column < hi:
            res = fallback_steepest_descent(
                x0[:, lo:hi], w0[:, lo:hi], ax=ax0[:, lo:hi], aw=aw0[:, lo:hi]
            )
            state.x[:, lo:hi] = res.x
            state.p[:, lo:hi] = res.p
            ap_slice = np.zeros_like(res.p)
            if res.c_w.shape[0]:
                ap_slice += aw0[:, lo:hi] @ res.c_w
            state.ap[:, lo:hi] = ap_slice
            state.ax[:, lo:hi] = ax0[:, lo:hi] @ res.c_x + ap_slice
            return
    raise RankDeficiencyError(column, "failing column outside the active partition")


def _orth_active(state, opts, gram, loss):
    """Re-orthonormalize the active block in place, updating the AX cache."""
    if opts.orth_scheme == "taylor-polar" and loss <= 0.1:
        poly = polar_correction(gram, opts.taylor_terms)
        state.x = state.x @ poly
        state.ax = state.ax @ poly
        return
    q, r = cholesky_qr(state.x, gram=gram)
    state.x = q
    state.ax = sla.solve_triangular(r.T, state.ax.T, lower=True).T


def _run_subblocks(state, threads):
    """Update every subblock, writing results into fresh full-width arrays.

    Subblocks read shared immutable inputs and write disjoint column
    ranges, so the result is identical for any thread count.
    """
    k_act = state.k_act
    rdtype = state.x.dtype
    x_new = np.empty((state.x.shape[0], k_act), dtype=rdtype)
    p_new = np.empty_like(x_new)
    ax_new = np.empty_like(x_new)
    ap_new = np.empty_like(x_new)
    fallbacks = 0
    coeff_scale = 1.0

    def one(span):
        lo, hi = span
        p_j = state.p[:, lo:hi] if state.p is not None else None
        ap_j = state.ap[:, lo:hi] if state.ap is not None else None
        return lo, hi, block_update(
            state.x[:, lo:hi],
            state.w[:, lo:hi],
            p_j,
            ax=state.ax[:, lo:hi],
            aw=state.aw[:, lo:hi],
            ap=ap_j,
        )

    if threads > 1 and len(state.partition) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, state.partition))
    else:
        results = [one(span) for span in state.partition]

    for lo, hi, res in results:
        x_new[:, lo:hi] = res.x
        p_new[:, lo:hi] = res.p
        ap_slice = np.zeros_like(res.p)
        if res.c_w.shape[0]:
            ap_slice += state.aw[:, lo:hi] @ res.c_w
        if res.c_p.shape[0] and state.ap is not None:
            ap_slice += state.ap[:, lo:hi] @ res.c_p
        ap_new[:, lo:hi] = ap_slice
        ax_new[:, lo:hi] = state.ax[:, lo:hi] @ res.c_x + ap_slice
        fallbacks += int(res.used_fallback)
        coeff_scale = max(coeff_scale, res.coeff_scale)
    return x_new, p_new, ax_new, ap_new, fallbacks, coeff_scale


def _leading_columns(state, k):
    """Leading k columns (and cached products) across [X_lock, X]."""
    n_locked = state.n_locked
    if n_locked >= k:
        return state.x_lock[:, :k], state.ax_lock[:, :k]
    need = k - n_locked
    x = np.concatenate([state.x_lock, state.x[:, :need]], axis=1)
    ax = np.concatenate([state.ax_lock, state.ax[:, :need]], axis=1)
    return x, ax


def _full_basis(state):
    s = np.concatenate([state.x_lock, state.x], axis=1)
    a_s = np.concatenate([state.ax_lock, state.ax], axis=1)
    return s, a_s


def _extract_ritz(state, a, fresh_ax=True):
    """Rayleigh-Ritz over [X_lock, X] using cached products for the pencil."""
    s, a_s = _full_basis(state)
    k_total = s.shape[1]
    pencil = SmallPencil(block_inner(s, a_s), block_inner(s, s))
    try:
        sol = solve_pencil(pencil, k_total)
    except SingularGramError:
        # Basis degraded badly (e.g. long orthonormalization skips): clean
        # the active block and retry once.
        try:
            q, r = cholesky_qr(state.x)
            state.ax = sla.solve_triangular(r.T, state.ax.T, lower=True).T
        except RankDeficiencyError:
            q = np.linalg.qr(state.x)[0]
            state.ax = a.apply(q)
        state.x = q
        s, a_s = _full_basis(state)
        pencil = SmallPencil(block_inner(s, a_s), block_inner(s, s))
        sol = solve_pencil(pencil, k_total)
    vectors = s @ sol.c
    if fresh_ax:
        ax_full = a.apply(vectors)  # flush accumulated round-off
    else:
        ax_full = a_s @ sol.c
    residual = ax_full - vectors * sol.omega[None, :]
    ritz = RitzResult(
        values=sol.omega,
        vectors=vectors,
        residual_norms=np.linalg.norm(residual, axis=0),
    )
    return ritz, ax_full, residual


def ppcg_solve(a, t=None, x0=None, opts=None, threads=1):
    """Compute the lowest eigenpairs of a Hermitian operator with PPCG.

    Parameters
    ----------
    a : operator with ``n``, ``dtype`` and ``apply(block)``
        Hermitian operator (trusted, not verified).
    t : operator or None
        Hermitian positive definite preconditioner; None means identity.
    x0 : array or None
        Initial guess with at most k + nbuf columns; missing columns are
        padded with seeded Gaussian vectors.  The block is orthonormalized.
    opts : SolverOptions
    threads : int
        Worker threads for the subblock loop; the result is identical for
        any value.

    Returns a SolveReport; ``status`` is "converged" or "max_iter".
    Convergence is judged on the k leading (non-buffer) columns only.
    """
    if opts is None:
        raise ValueError("opts is required")
    opts.validate()
    # Pin the BLAS pools: the dense work here is many small products, where
    # BLAS threading costs more than it buys, and a fixed configuration
    # keeps results identical for any `threads` value.
    with threadpool_limits(limits=1):
        return _ppcg_solve(a, t, x0, opts, threads)


def _ppcg_solve(a, t, x0, opts, threads):
    a = CountingOperator(a)
    k_want = opts.k
    k_total = k_want + opts.resolved_nbuf()
    if k_total > a.n:
        raise DimensionError(f"k + nbuf = {k_total} exceeds operator dimension {a.n}")

    t_start = time.perf_counter()
    x = _initial_block(a, x0, k_total, opts.seed)
    ax = a.apply(x)
    empty = np.zeros((a.n, 0), dtype=x.dtype)
    state = SolverState(
        x=x,
        w=ax - x @ block_inner(x, ax),
        p=None,
        x_lock=empty,
        values_lock=np.zeros(0),
        iteration=0,
        partition=split_blocks(k_total, opts.sbsize),
        sbsize=opts.sbsize,
        ax=ax,
        ax_lock=empty,
        ap=None,
    )

    trace = []
    values_history = []
    orth_loss_history = []
    proj_defect_history = []
    rr_count = 0
    recoveries = 0
    cache_refreshes = 0
    prev_trace_value = None
    status = "max_iter"
    iterations = opts.max_iter

    for it in range(1, opts.max_iter + 1):
        state.iteration = it
        x_lead, ax_lead = _leading_columns(state, k_want)
        metrics = convergence_metrics(x_lead, ax_lead, prev_trace_value)
        prev_trace_value = metrics.trace_value
        done = metrics.rel_subspace_residual <= opts.tol or (
            opts.trace_tol is not None and metrics.rel_trace_change <= opts.trace_tol
        )
        if done or state.k_act == 0:
            status = "converged"
            iterations = it - 1
            break
        trace.append(
            TraceRecord(
                iteration=it,
                trace_value=metrics.trace_value,
                rel_resid=metrics.rel_subspace_residual,
                n_locked=state.n_locked,
                n_matvec=a.matvecs,
                wall_ms=(time.perf_counter() - t_start) * 1e3,
            )
        )

        # Precondition the residual block, then project the search
        # directions away from the current and locked subspaces.
        state.w = t.apply(state.w) if t is not None else state.w
        state.aw = a.apply(state.w)
        if opts.project_w:
            _apply_projection(state.x, state.ax, state.w, state.aw)
            if state.n_locked:
                _apply_projection(state.x_lock, state.ax_lock, state.w, state.aw)
        if state.p is not None and opts.project_p:
            _apply_projection(state.x, state.ax, state.p, state.ap)
            if state.n_locked:
                _apply_projection(state.x_lock, state.ax_lock, state.p, state.ap)
        basis, _ = _full_basis(state)
        wnorm = np.linalg.norm(state.w)
        proj_defect_history.append(
            float(np.linalg.norm(block_inner(basis, state.w)) / max(wnorm, 1e-300))
        )

        prev_blocks = (state.x, state.w, state.p, state.ax, state.aw, state.ap)
        state.x, state.p, state.ax, state.ap, nfb, coeff_scale = _run_subblocks(state, threads)
        recoveries += nfb

        # Healthy updates produce near-unit X columns and step-sized P
        # columns (the coefficients are B-orthonormal); runaway entries mean
        # the small pencils have become numerically meaningless.
        broken = not all(
            np.isfinite(b).all() for b in (state.x, state.p, state.ax, state.ap)
        )
        if not broken:
            broken = max(float(np.max(np.abs(state.x))), float(np.max(np.abs(state.p)))) > 1e8
        if broken:
            # Numerical breakdown (possible when orthonormalization has been
            # skipped for many steps): restore the pre-update block, rebuild
            # an orthonormal basis, and restart the search directions.
            recoveries += 1
            orth_loss_history.append(math.inf)
            state.x = np.linalg.qr(prev_blocks[0])[0]
            state.ax = a.apply(state.x)
            state.p = None
            state.ap = None
            state.w = state.ax - state.x @ block_inner(state.x, state.ax)
            continue
        if coeff_scale > _COEFF_REFRESH:
            # Ill-conditioned pencils amplify round-off in the combination
            # updates; the caches no longer track the true products.  Spend
            # real operator applications to restore them.
            cache_refreshes += 1
            state.ax = a.apply(state.x)
            state.ap = a.apply(state.p)

        # Loss of orthonormality of the updated block, measured every
        # iteration (drives the adaptive policy and the diagnostics).
        loss, gram_act = _orth_loss(state)
        orth_loss_history.append(loss)

        rr_now = math.isfinite(opts.rr_period) and it % int(opts.rr_period) == 0
        if rr_now:
            ritz, ax_full, residual = _extract_ritz(state, a, fresh_ax=True)
            rr_count += 1
            values_history.append(ritz.values.copy())
            lock_and_compact(state, ritz, opts.tol, residual=residual)
            state.ax_lock = ax_full[:, : state.n_locked]
            state.ax = ax_full[:, state.n_locked:]
        else:
            do_orth = (
                opts.orth_policy == "every"
                or (opts.orth_policy == "periodic" and it % opts.orth_period == 0)
                or (opts.orth_policy == "adaptive" and loss >= opts.orth_threshold)
            )
            if do_orth:
                try:
                    _orth_active(state, opts, gram_act, loss)
                except RankDeficiencyError as err:
                    recoveries += 1
                    _redo_subblock_without_p(state, prev_blocks, err.column)
                    try:
                        _, gram_act = _orth_loss(state)
                        _orth_active(state, opts, gram_act, loss)
                    except RankDeficiencyError:
                        # last resort: Householder QR and a fresh cache
                        state.x = np.linalg.qr(state.x)[0]
                        state.ax = a.apply(state.x)
            state.w = state.ax - state.x @ block_inner(state.x, state.ax)

    wall_ms = (time.perf_counter() - t_start) * 1e3
    ritz, ax_full, _ = _extract_ritz(state, a, fresh_ax=False)
    rr_count += 1
    # Monotone trace decrease is expected but not guaranteed for s > 1;
    # iterations where it rose are flagged for inspection.
    trace_increases = [
        r2.iteration for r1, r2 in zip(trace, trace[1:]) if r2.trace_value > r1.trace_value
    ]
    report = SolveReport(
        values=ritz.values[:k_want],
        vectors=ritz.vectors[:, :k_want],
        trace=trace,
        status=status,
        iterations=iterations,
        matvecs=a.matvecs,
        rr_count=rr_count,
        breakdown_recoveries=recoveries,
        wall_ms=wall_ms,
        values_history=values_history,
        diagnostics={
            "orth_loss": orth_loss_history,
            "proj_defect": proj_defect_history,
            "final_residual_norms": ritz.residual_norms[:k_want].tolist(),
            "cache_refreshes": cache_refreshes,
            "trace_increases": trace_increases,
        },
    )
    return report
