"""Rayleigh-Ritz extraction, residuals, and stopping metrics."""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import SmallPencil, block_inner, solve_pencil
from .errors import DimensionError

__all__ = [
    "RitzResult",
    "ConvergenceMetrics",
    "subspace_residual",
    "rayleigh_ritz",
    "convergence_metrics",
    "detect_converged",
]

# Guard against a vanishing denominator in relative metrics.
_DEN_FLOOR = 1e-300


@dataclass
class RitzResult:
    """Ritz values (ascending), orthonormal Ritz vectors, per-column residual norms."""

    values: np.ndarray
    vectors: np.ndarray = field(repr=False)
    residual_norms: np.ndarray


@dataclass
class ConvergenceMetrics:
    rel_subspace_residual: float
    trace_value: float
    rel_trace_change: float


def subspace_residual(x, ax):
    """Block residual AX - X (X^H A X), with AX supplied by the caller.

    One operator application per outer iteration is the budget, so the
    product is never recomputed here.
    """
    if x.shape != ax.shape:
        raise DimensionError(f"X and AX shapes differ: {x.shape} vs {ax.shape}")
    return ax - x @ block_inner(x, ax)


def rayleigh_ritz(a, s, want, a_s=None):
    """Extract the `want` smallest Ritz pairs of A over the basis S.

    S need not be orthonormal (the Gram matrix enters the projected
    pencil).  ``a_s`` may supply a cached A S; otherwise A is applied once.
    """
    if a_s is None:
        a_s = a.apply(s)
    pencil = SmallPencil(block_inner(s, a_s), block_inner(s, s))
    sol = solve_pencil(pencil, want)
    vectors = s @ sol.c
    avec = a_s @ sol.c
    resid = avec - vectors * sol.omega[None, :]
    return RitzResult(
        values=sol.omega,
        vectors=vectors,
        residual_norms=np.linalg.norm(resid, axis=0),
    )


def convergence_metrics(x, ax, prev_trace=None):
    """Relative subspace residual and relative trace change of the iterate.

    rel_subspace_residual = ||AX - X (X^H A X)||_F / ||X^H A X||_F and
    rel_trace_change = |trace - prev_trace| / |trace|, both guarded against
    zero denominators; the trace change is +inf when no previous value is
    given.
    """
    xax = block_inner(x, ax)
    resid = ax - x @ xax
    denom = max(np.linalg.norm(xax, "fro"), _DEN_FLOOR)
    rel_resid = np.linalg.norm(resid, "fro") / denom
    trace_value = float(np.trace(xax).real)
    if prev_trace is None:
        rel_change = math.inf
    else:
        rel_change = abs(trace_value - prev_trace) / max(abs(trace_value), _DEN_FLOOR)
    return ConvergenceMetrics(
        rel_subspace_residual=float(rel_resid),
        trace_value=trace_value,
        rel_trace_change=float(rel_change),
    )


def detect_converged(ritz, tol):
    """Indices of converged leading columns, prefix-closed.

    Column j counts as converged when its residual norm is at most
    tol * max(|theta_j|, 1).  Only a leading run is returned so locked
    columns stay contiguous at the front.
    """
    locked = []
    for j, (theta, rnorm) in enumerate(zip(ritz.values, ritz.residual_norms)):
        if rnorm <= tol * max(abs(theta), 1.0):
            locked.append(j)
        else:
            break
    return locked
