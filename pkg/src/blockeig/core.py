"""Dense block-vector kernels.

A "block" is a NumPy array of shape (n, m) holding m column vectors of
dimension n, real (float64) or complex (complex128).  Everything here is a
pure function of its inputs; summation order is fixed by the underlying
BLAS calls, so results are reproducible run to run.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ApplicabilityError, DimensionError, RankDeficiencyError, SingularGramError

__all__ = [
    "SmallPencil",
    "PencilSolution",
    "block_inner",
    "project_out",
    "cholesky_qr",
    "polar_correction",
    "taylor_polar_orth",
    "solve_pencil",
]


def as_block(x):
    """Validate a block of column vectors and return it as a 2-D float array."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise DimensionError(f"expected a 2-D block, got shape {x.shape}")
    if not np.issubdtype(x.dtype, np.floating) and not np.issubdtype(x.dtype, np.complexfloating):
        x = x.astype(np.float64)
    return x


def check_finite(x, name="block"):
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")


def block_inner(x, y):
    """Gram product X^H Y of two blocks with a common row dimension."""
    x = as_block(x)
    y = as_block(y)
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"row dimensions differ: {x.shape[0]} vs {y.shape[0]}")
    return x.conj().T @ y


def project_out(x, y):
    """Project the columns of Y onto the orthogonal complement of range(X).

    Returns Y - X (X^H Y).  X is assumed to have (approximately) orthonormal
    columns; the projector is only as accurate as that assumption.
    """
    g = block_inner(x, y)
    return y - x @ g


# Pivots below this fraction of the Gram diagonal scale count as breakdown:
# columns past that point have no numerically meaningful new direction.
_PIVOT_FLOOR = 1e-14


def _cholesky_upper(g):
    """Upper-triangular R with R^H R = G for a Hermitian Gram matrix G.

    Raises RankDeficiencyError with the offending column index when a pivot
    falls to the round-off floor.  The diagonal of R is real and positive.
    """
    m = g.shape[0]
    r = np.zeros_like(g)
    scale = max(float(np.max(np.abs(np.diag(g)).real)), 1e-300)
    for j in range(m):
        pivot = g[j, j].real - np.sum(np.abs(r[:j, j]) ** 2)
        if pivot <= _PIVOT_FLOOR * scale or not np.isfinite(pivot):
            raise RankDeficiencyError(j)
        r[j, j] = np.sqrt(pivot)
        if j + 1 < m:
            r[j, j + 1:] = (g[j, j + 1:] - r[:j, j].conj() @ r[:j, j + 1:]) / r[j, j]
    return r


def cholesky_qr(x, gram=None):
    """Orthonormalize a full-rank block via Cholesky of its Gram matrix.

    Returns (Q, R) with Q R = X, Q^H Q = I and R upper triangular with a
    positive real diagonal.  ``gram`` may supply a precomputed X^H X.
    Raises RankDeficiencyError when the Gram matrix is not numerically
    positive definite.
    """
    x = as_block(x)
    if gram is None:
        gram = block_inner(x, x)
    r = _cholesky_upper(gram)
    # Q = X R^{-1}, via a triangular solve on the transposed system.
    q = sla.solve_triangular(r.T, x.T, lower=True).T
    return q, r


_TAYLOR_APPLICABILITY = 0.1


def polar_correction(gram, terms):
    """Series approximation of (X^H X)^{-1/2} from the Gram matrix.

    With Y = gram - I, evaluates the Taylor polynomial of (1 + y)^{-1/2}
    including powers Y^1 .. Y^terms via Horner's scheme:
    c_0 = 1, c_i = -c_{i-1} (2i - 1) / (2i).
    """
    if terms < 0:
        raise ValueError("terms must be non-negative")
    m = gram.shape[0]
    eye = np.eye(m, dtype=gram.dtype)
    y = gram - eye
    coeffs = [1.0]
    for i in range(1, terms + 1):
        coeffs.append(-coeffs[-1] * (2 * i - 1) / (2 * i))
    p = coeffs[-1] * eye
    for c in reversed(coeffs[:-1]):
        p = c * eye + y @ p
    return p


def taylor_polar_orth(x, terms=4):
    """Approximate the polar factor X (X^H X)^{-1/2} by a truncated series.

    Only valid near orthonormality: requires ||X^H X - I||_F <= 0.1, else
    ApplicabilityError (use cholesky_qr instead).
    """
    x = as_block(x)
    gram = block_inner(x, x)
    ynorm = np.linalg.norm(gram - np.eye(x.shape[1], dtype=gram.dtype), "fro")
    if ynorm > _TAYLOR_APPLICABILITY:
        raise ApplicabilityError(
            f"||X^H X - I||_F = {ynorm:.3g} exceeds {_TAYLOR_APPLICABILITY}"
        )
    return x @ polar_correction(gram, terms)


@dataclass
class SmallPencil:
    """Projected pencil (A_hat, B_hat) of a trial basis S: A_hat = S^H A S, B_hat = S^H S.

    Both matrices are symmetrized on construction so downstream dense
    solvers see exactly Hermitian storage.
    """

    a_hat: np.ndarray
    b_hat: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_hat))
        b = np.atleast_2d(np.asarray(self.b_hat))
        if a.shape != b.shape or a.shape[0] != a.shape[1]:
            raise DimensionError(f"pencil blocks must be square and equal-shaped, got {a.shape} and {b.shape}")
        self.a_hat = 0.5 * (a + a.conj().T)
        self.b_hat = 0.5 * (b + b.conj().T)

    @property
    def dim(self):
        return self.a_hat.shape[0]


@dataclass
class PencilSolution:
    """Ascending eigenvalues and B-orthonormal coefficients of a SmallPencil."""

    omega: np.ndarray
    c: np.ndarray = field(repr=False)


_GRAM_RTOL = 1e-12


def solve_pencil(pencil, want):
    """Smallest `want` eigenpairs of A_hat C = B_hat C diag(omega), C^H B_hat C = I.

    Raises SingularGramError when B_hat is numerically singular (smallest
    eigenvalue <= 1e-12 ||B_hat||), which signals linearly dependent search
    directions; callers drop directions and retry.
    """
    d = pencil.dim
    if not 1 <= want <= d:
        raise ValueError(f"want must be in [1, {d}], got {want}")
    bnorm = np.linalg.norm(pencil.b_hat, "fro")
    floor = _GRAM_RTOL * max(bnorm, 1e-300)
    # lambda_min(B) > floor iff B - floor I admits a Cholesky factor; far
    # cheaper than an eigendecomposition of B.
    try:
        np.linalg.cholesky(pencil.b_hat - floor * np.eye(d))
    except np.linalg.LinAlgError:
        raise SingularGramError(
            f"Gram matrix numerically singular: lambda_min <= {floor:.3g} (||B||_F = {bnorm:.3g})"
        ) from None
    try:
        omega, c = sla.eigh(pencil.a_hat, pencil.b_hat)
    except sla.LinAlgError:
        raise SingularGramError("Gram matrix not positive definite in dense solve") from None
    return PencilSolution(omega=omega[:want], c=c[:, :want])
