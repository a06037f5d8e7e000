"""Matrix-free operator wrappers.

Solvers only ever see two operations: apply a Hermitian operator A to a
block of column vectors, and apply a Hermitian positive definite
preconditioner T to a block.  Anything with ``n``, ``dtype`` and
``apply(block)`` works; the classes here cover the common cases.
"""

import numpy as np

from .errors import DimensionError

__all__ = [
    "LinearBlockOperator",
    "DenseHermitian",
    "DiagonalOperator",
    "MatrixFreeOperator",
    "IdentityPreconditioner",
    "DiagonalPreconditioner",
    "CountingOperator",
]


class LinearBlockOperator:
    """Base class: square operator applied to n x m blocks via ``apply``."""

    n = 0
    dtype = np.float64

    def apply(self, block):
        raise NotImplementedError

    def __matmul__(self, block):
        return self.apply(block)

    def _check(self, block):
        block = np.asarray(block)
        if block.ndim != 2 or block.shape[0] != self.n:
            raise DimensionError(
                f"operator of dimension {self.n} applied to block of shape {block.shape}"
            )
        return block


class DenseHermitian(LinearBlockOperator):
    """Explicit dense Hermitian matrix, mostly for tests and oracles."""

    def __init__(self, matrix):
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {matrix.shape}")
        self.matrix = 0.5 * (matrix + matrix.conj().T)
        self.n = matrix.shape[0]
        self.dtype = self.matrix.dtype

    def apply(self, block):
        return self.matrix @ self._check(block)

    def to_dense(self):
        return self.matrix


class DiagonalOperator(LinearBlockOperator):
    def __init__(self, diag):
        self.diag = np.asarray(diag)
        self.n = self.diag.shape[0]
        self.dtype = self.diag.dtype

    def apply(self, block):
        return self.diag[:, None] * self._check(block)

    def to_dense(self):
        return np.diag(self.diag)


class MatrixFreeOperator(LinearBlockOperator):
    """Wrap a block-apply callable as an operator."""

    def __init__(self, n, apply_fn, dtype=np.float64):
        self.n = n
        self._apply_fn = apply_fn
        self.dtype = np.dtype(dtype)

    def apply(self, block):
        return self._apply_fn(self._check(block))


class IdentityPreconditioner(LinearBlockOperator):
    def __init__(self, n):
        self.n = n

    def apply(self, block):
        return self._check(block).copy()


class DiagonalPreconditioner(LinearBlockOperator):
    """HPD diagonal preconditioner: all entries must be strictly positive."""

    def __init__(self, d):
        d = np.asarray(d, dtype=np.float64)
        if d.ndim != 1:
            raise DimensionError("diagonal must be a 1-D array")
        if not np.all(d > 0):
            raise ValueError("preconditioner diagonal must be strictly positive")
        self.d = d
        self.n = d.shape[0]
        self.dtype = d.dtype

    def apply(self, block):
        return self.d[:, None] * self._check(block)


class CountingOperator(LinearBlockOperator):
    """Decorator that counts applications column-by-column (matvec units)."""

    def __init__(self, inner):
        self.inner = inner
        self.n = inner.n
        self.dtype = inner.dtype
        self.matvecs = 0

    def apply(self, block):
        self.matvecs += np.asarray(block).shape[1]
        return self.inner.apply(block)
