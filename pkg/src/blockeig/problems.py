"""Problem sources: sparse Hermitian operators, model Hamiltonians, file I/O.

The model problems are desk-scale stand-ins for the large Hamiltonians the
solvers are meant for: Dirichlet Laplacians with known spectra, Laplacians
plus potential wells (clustered low eigenvalues), and seeded random sparse
Hermitian matrices.
"""

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, ParseError, UnsupportedFormatError
from .operators import DiagonalPreconditioner, LinearBlockOperator

__all__ = [
    "SparseHermitian",
    "read_matrix_market",
    "write_matrix_market",
    "laplacian_1d",
    "laplacian_3d",
    "laplacian_plus_potential",
    "two_well_potential",
    "well_problem",
    "random_hermitian",
    "jacobi_preconditioner",
]


class SparseHermitian(LinearBlockOperator):
    """Sparse Hermitian operator stored in compressed-row form.

    ``symmetry`` is "symmetric" for real-symmetric data and "hermitian" for
    complex-Hermitian data.  The full (mirrored) matrix is stored so block
    application is a single CSR product; assembly guarantees Hermitian
    structure and values.
    """

    def __init__(self, csr, symmetry):
        if symmetry not in ("symmetric", "hermitian"):
            raise ValueError(f"unknown symmetry {symmetry!r}")
        self._csr = csr.tocsr()
        self._csr.sum_duplicates()
        self.n = csr.shape[0]
        self.symmetry = symmetry
        self.dtype = self._csr.dtype

    @classmethod
    def from_triangle(cls, n, rows, cols, values, symmetry):
        """Assemble from one stored triangle, mirroring across the diagonal.

        Off-diagonal entries (i, j) also contribute (j, i) with the
        conjugated value; duplicates are summed.
        """
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        values = np.asarray(values)
        off = rows != cols
        all_rows = np.concatenate([rows, cols[off]])
        all_cols = np.concatenate([cols, rows[off]])
        mirrored = values[off].conj() if symmetry == "hermitian" else values[off]
        all_vals = np.concatenate([values, mirrored])
        mat = sp.coo_matrix((all_vals, (all_rows, all_cols)), shape=(n, n)).tocsr()
        return cls(mat, symmetry)

    @classmethod
    def from_dense(cls, matrix):
        matrix = np.asarray(matrix)
        symmetry = "hermitian" if np.iscomplexobj(matrix) else "symmetric"
        herm = 0.5 * (matrix + matrix.conj().T)
        return cls(sp.csr_matrix(herm), symmetry)

    def apply(self, block):
        return self._csr @ self._check(block)

    def diagonal(self):
        return self._csr.diagonal()

    def to_dense(self):
        return self._csr.toarray()

    def to_coo_lower(self):
        """(rows, cols, values) of the lower triangle, row-major order."""
        low = sp.tril(self._csr, format="coo")
        order = np.lexsort((low.col, low.row))
        return low.row[order], low.col[order], low.data[order]

    @property
    def nnz(self):
        return self._csr.nnz


def _parse_mm_header(line):
    parts = line.split()
    if len(parts) != 5 or parts[0] != "%%MatrixMarket":
        raise ParseError(1, "not a MatrixMarket header")
    _, obj, fmt, field, qualifier = (p.lower() for p in parts)
    if obj != "matrix" or fmt != "coordinate":
        raise UnsupportedFormatError(f"only coordinate matrices are supported, got {obj}/{fmt}")
    if field not in ("real", "complex"):
        raise UnsupportedFormatError(f"field {field!r} not supported (need real or complex)")
    if qualifier not in ("symmetric", "hermitian"):
        raise UnsupportedFormatError(
            f"qualifier {qualifier!r} not supported (need symmetric or hermitian)"
        )
    if field == "complex" and qualifier == "symmetric":
        raise UnsupportedFormatError("complex symmetric files are not Hermitian")
    return field, qualifier


def read_matrix_market(path):
    """Read a Matrix Market coordinate file into a SparseHermitian.

    Accepts real-symmetric and complex-hermitian qualifiers, 1-based
    indices, one stored triangle.  Entries are mirrored and duplicates
    summed.  Raises ParseError (with line number) on malformed content and
    UnsupportedFormatError on valid-but-foreign formats.
    """
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise ParseError(1, "empty file")
    field, qualifier = _parse_mm_header(lines[0])

    lineno = 1
    size = None
    rows, cols, vals = [], [], []
    want_vals = 4 if field == "complex" else 3
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        if size is None:
            if len(parts) != 3:
                raise ParseError(lineno, "size line must be 'rows cols nnz'")
            try:
                nr, nc, nnz = (int(p) for p in parts)
            except ValueError:
                raise ParseError(lineno, "size line must contain integers") from None
            if nr != nc:
                raise UnsupportedFormatError(f"matrix is {nr}x{nc}, need square")
            size = (nr, nnz)
            continue
        if len(parts) != want_vals:
            raise ParseError(lineno, f"expected {want_vals} fields, got {len(parts)}")
        try:
            i, j = int(parts[0]), int(parts[1])
            if field == "complex":
                v = complex(float(parts[2]), float(parts[3]))
            else:
                v = float(parts[2])
        except ValueError:
            raise ParseError(lineno, "malformed entry") from None
        n = size[0]
        if not (1 <= i <= n and 1 <= j <= n):
            raise ParseError(lineno, f"index ({i}, {j}) out of range for n = {n}")
        if field == "complex" and i == j and v.imag != 0.0:
            raise ParseError(lineno, "hermitian matrix has a non-real diagonal entry")
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)

    if size is None:
        raise ParseError(lineno, "missing size line")
    if len(vals) != size[1]:
        raise ParseError(lineno, f"expected {size[1]} entries, found {len(vals)}")
    dtype = np.complex128 if field == "complex" else np.float64
    return SparseHermitian.from_triangle(
        size[0],
        np.array(rows, dtype=np.int64),
        np.array(cols, dtype=np.int64),
        np.array(vals, dtype=dtype),
        qualifier,
    )


def write_matrix_market(op, path):
    """Write the stored lower triangle of a SparseHermitian in MM coordinate format."""
    field = "complex" if op.symmetry == "hermitian" else "real"
    rows, cols, vals = op.to_coo_lower()
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate {field} {op.symmetry}\n")
        fh.write(f"{op.n} {op.n} {len(vals)}\n")
        for i, j, v in zip(rows, cols, vals):
            if field == "complex":
                fh.write(f"{i + 1} {j + 1} {float(v.real)!r} {float(v.imag)!r}\n")
            else:
                fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def laplacian_1d(n):
    """Tridiagonal (-1, 2, -1) Dirichlet Laplacian; eigenvalues 2 - 2 cos(j pi / (n+1))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    main = 2.0 * np.ones(n)
    off = -np.ones(n - 1)
    mat = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    return SparseHermitian(mat, "symmetric")


def laplacian_3d(nx, ny, nz):
    """7-point-stencil Dirichlet Laplacian on an nx x ny x nz grid (C-order flattening)."""
    if min(nx, ny, nz) < 1:
        raise ValueError("grid dimensions must be >= 1")
    lx = laplacian_1d(nx)._csr
    ly = laplacian_1d(ny)._csr
    lz = laplacian_1d(nz)._csr
    ix, iy, iz = sp.identity(nx), sp.identity(ny), sp.identity(nz)
    mat = (
        sp.kron(sp.kron(lx, iy), iz)
        + sp.kron(sp.kron(ix, ly), iz)
        + sp.kron(sp.kron(ix, iy), lz)
    ).tocsr()
    return SparseHermitian(mat, "symmetric")


def laplacian_plus_potential(nx, ny, nz, potential):
    """3-D Laplacian plus a diagonal (local) potential."""
    potential = np.asarray(potential, dtype=np.float64)
    n = nx * ny * nz
    if potential.shape != (n,):
        raise DimensionError(f"potential has shape {potential.shape}, grid needs ({n},)")
    lap = laplacian_3d(nx, ny, nz)._csr
    mat = (lap + sp.diags(potential)).tocsr()
    return SparseHermitian(mat, "symmetric")


def two_well_potential(nx, ny, nz, depth, seed=0):
    """Two randomly placed Gaussian wells on the unit cube.

    A deep double well clusters the lowest eigenvalues in near-degenerate
    pairs, which is the regime where projection and periodic subspace
    rotation matter most.
    """
    rng = np.random.default_rng(seed)
    # Mirror-image wells: the grid (i + 0.5)/n is symmetric under x -> 1 - x,
    # so the two discrete well profiles are exact reflections and the low
    # states pair up with only a small tunneling splitting.
    c1 = np.array([0.28, 0.28, 0.28]) + rng.uniform(-0.06, 0.06, size=3)
    centers = np.array([c1, 1.0 - c1])
    width = 0.11
    gx = (np.arange(nx) + 0.5) / nx
    gy = (np.arange(ny) + 0.5) / ny
    gz = (np.arange(nz) + 0.5) / nz
    px, py, pz = np.meshgrid(gx, gy, gz, indexing="ij")
    pts = np.stack([px.ravel(), py.ravel(), pz.ravel()], axis=1)
    v = np.zeros(nx * ny * nz)
    for c in centers:
        d2 = np.sum((pts - c[None, :]) ** 2, axis=1)
        v -= depth * np.exp(-d2 / (2.0 * width**2))
    return v


def well_problem(nx, ny, nz, depth, seed=0):
    return laplacian_plus_potential(nx, ny, nz, two_well_potential(nx, ny, nz, depth, seed))


def random_hermitian(n, density, seed, complex_field=False):
    """Seeded sparse Hermitian matrix with standard-normal entries.

    Positions are sampled independently on the upper triangle with the
    given density and mirrored; deterministic for a fixed seed.
    """
    if not 0 < density <= 1:
        raise ValueError("density must be in (0, 1]")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n)
    keep = rng.random(iu.shape[0]) < density if density < 1 else np.ones(iu.shape[0], bool)
    iu, ju = iu[keep], ju[keep]
    vals = rng.standard_normal(iu.shape[0])
    if complex_field:
        imag = rng.standard_normal(iu.shape[0])
        imag[iu == ju] = 0.0  # real diagonal
        vals = vals + 1j * imag
        return SparseHermitian.from_triangle(n, iu, ju, vals, "hermitian")
    return SparseHermitian.from_triangle(n, iu, ju, vals, "symmetric")


_JACOBI_FLOOR = 1e-8


def jacobi_preconditioner(op, shift=0.0):
    """Diagonal preconditioner d_i = 1 / max(A_ii - shift, floor); always HPD."""
    diag = np.real(op.diagonal())
    d = 1.0 / np.maximum(diag - shift, _JACOBI_FLOOR)
    return DiagonalPreconditioner(d)
