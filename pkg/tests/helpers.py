"""Shared test utilities: seeded generators and independent oracles."""

import numpy as np


def rng(seed):
    return np.random.default_rng(seed)


def random_block(n, m, seed, complex_field=False):
    g = rng(seed)
    x = g.standard_normal((n, m))
    if complex_field:
        x = x + 1j * g.standard_normal((n, m))
    return x


def random_orthonormal(n, m, seed, complex_field=False):
    x = random_block(n, m, seed, complex_field)
    q, _ = np.linalg.qr(x)
    return q


def random_dense_hermitian(n, seed, complex_field=False):
    g = rng(seed)
    a = g.standard_normal((n, n))
    if complex_field:
        a = a + 1j * g.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def random_dense_hpd(n, seed, complex_field=False):
    g = random_block(n, n + 2, seed, complex_field)
    return g @ g.conj().T + 0.1 * np.eye(n)


def gram_oracle(x, y):
    """Entrywise triple-loop X^H Y, no BLAS."""
    mx, my = x.shape[1], y.shape[1]
    out = np.zeros((mx, my), dtype=np.result_type(x.dtype, y.dtype))
    for i in range(mx):
        for j in range(my):
            s = 0.0
            for r in range(x.shape[0]):
                s += np.conj(x[r, i]) * y[r, j]
            out[i, j] = s
    return out


def mgs_qr_oracle(x):
    """Modified Gram-Schmidt QR with positive diagonal R."""
    x = x.astype(np.result_type(x.dtype, np.float64), copy=True)
    n, m = x.shape
    q = np.zeros_like(x)
    r = np.zeros((m, m), dtype=x.dtype)
    for j in range(m):
        v = x[:, j].copy()
        for i in range(j):
            r[i, j] = np.vdot(q[:, i], v)
            v -= r[i, j] * q[:, i]
        r[j, j] = np.linalg.norm(v)
        q[:, j] = v / r[j, j]
    return q, r


def polar_factor_oracle(x):
    """Exact polar factor X (X^H X)^{-1/2} via dense eigendecomposition."""
    g = x.conj().T @ x
    w, v = np.linalg.eigh(g)
    inv_sqrt = v @ np.diag(1.0 / np.sqrt(w)) @ v.conj().T
    return x @ inv_sqrt


def pencil_oracle(a_hat, b_hat, want):
    """Cholesky-reduce the Hermitian pencil to standard form and solve densely.

    Returns (omega, c) with c B-orthonormal, eigenvalues ascending.
    """
    l = np.linalg.cholesky(b_hat)
    linv = np.linalg.inv(l)
    m = linv @ a_hat @ linv.conj().T
    m = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(m)
    c = linv.conj().T @ v
    return w[:want], c[:, :want]


def dense_eigh_smallest(a_dense, k):
    w = np.linalg.eigvalsh(a_dense)
    return w[:k]
