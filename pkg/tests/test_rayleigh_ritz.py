import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockeig.core import block_inner
from blockeig.errors import DimensionError
from blockeig.operators import DenseHermitian
from blockeig.rayleigh_ritz import (
    RitzResult,
    convergence_metrics,
    detect_converged,
    rayleigh_ritz,
    subspace_residual,
)
from helpers import (
    pencil_oracle,
    random_block,
    random_dense_hermitian,
    random_orthonormal,
)


class TestSubspaceResidual:
    def test_exact_invariant_subspace_gives_zero(self):
        a = DenseHermitian(np.diag([1.0, 2.0, 3.0]))
        x = np.eye(3)[:, :2]
        r = subspace_residual(x, a.apply(x))
        assert np.array_equal(r, np.zeros((3, 2)))

    def test_hand_computed_2x2(self):
        a = DenseHermitian(np.array([[0.0, 1.0], [1.0, 0.0]]))
        x = np.array([[1.0], [0.0]])
        r = subspace_residual(x, a.apply(x))
        assert np.allclose(r, [[0.0], [1.0]])

    def test_residual_orthogonal_to_basis(self):
        a = DenseHermitian(random_dense_hermitian(20, seed=1))
        x = random_orthonormal(20, 4, seed=2)
        r = subspace_residual(x, a.apply(x))
        assert np.linalg.norm(block_inner(x, r)) < 1e-12 * max(1.0, np.linalg.norm(r))

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionError):
            subspace_residual(np.zeros((3, 2)), np.zeros((3, 3)))


class TestRayleighRitz:
    def test_diagonal_operator_identity_basis(self):
        a = DenseHermitian(np.diag([1.0, 2.0, 3.0]))
        res = rayleigh_ritz(a, np.eye(3), want=2)
        assert np.allclose(res.values, [1.0, 2.0])
        assert np.allclose(np.abs(res.vectors), np.eye(3)[:, :2], atol=1e-14)
        assert np.allclose(res.residual_norms, 0.0, atol=1e-14)

    def test_single_column_gives_rayleigh_quotient(self):
        a = DenseHermitian(random_dense_hermitian(6, seed=3))
        x = random_block(6, 1, seed=4)
        x /= np.linalg.norm(x)
        res = rayleigh_ritz(a, x, want=1)
        rq = float(np.real(block_inner(x, a.apply(x))[0, 0]))
        assert np.isclose(res.values[0], rq, atol=1e-13)

    def test_matches_dense_pencil_oracle(self):
        a_mat = random_dense_hermitian(30, seed=5)
        a = DenseHermitian(a_mat)
        s = random_block(30, 8, seed=6)
        res = rayleigh_ritz(a, s, want=4)
        a_hat = s.conj().T @ a_mat @ s
        b_hat = s.conj().T @ s
        w_ref, _ = pencil_oracle(0.5 * (a_hat + a_hat.conj().T), 0.5 * (b_hat + b_hat.conj().T), want=4)
        assert np.allclose(res.values, w_ref, atol=1e-12 * max(1.0, np.max(np.abs(w_ref))))

    def test_vectors_orthonormal_and_diagonalizing(self):
        a = DenseHermitian(random_dense_hermitian(25, seed=8))
        s = random_block(25, 10, seed=9)
        res = rayleigh_ritz(a, s, want=6)
        k = 6
        assert np.linalg.norm(block_inner(res.vectors, res.vectors) - np.eye(k)) < 1e-10 * np.sqrt(k)
        proj = block_inner(res.vectors, a.apply(res.vectors))
        off = proj - np.diag(np.diag(proj))
        assert np.linalg.norm(off) < 1e-8 * max(1.0, np.linalg.norm(res.values))

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_values_interlace_under_basis_enlargement(self, seed):
        a = DenseHermitian(random_dense_hermitian(18, seed=seed))
        s1 = random_block(18, 5, seed=seed + 1)
        extra = random_block(18, 3, seed=seed + 2)
        s2 = np.column_stack([s1, extra])
        want = 4
        r1 = rayleigh_ritz(a, s1, want=want)
        r2 = rayleigh_ritz(a, s2, want=want)
        assert np.all(r2.values <= r1.values + 1e-12)


class TestConvergenceMetrics:
    def test_invariant_subspace_residual_zero(self):
        a = DenseHermitian(np.diag([1.0, 2.0, 5.0]))
        x = np.eye(3)[:, :2]
        m = convergence_metrics(x, a.apply(x))
        assert m.rel_subspace_residual == 0.0
        assert m.trace_value == 3.0
        assert m.rel_trace_change == math.inf

    def test_hand_computed_ones_matrix(self):
        a = DenseHermitian(np.ones((2, 2)))
        x = np.array([[1.0], [0.0]])
        m = convergence_metrics(x, a.apply(x))
        assert np.isclose(m.rel_subspace_residual, 1.0)
        assert np.isclose(m.trace_value, 1.0)

    def test_trace_change_matches_recomputation(self):
        a = DenseHermitian(random_dense_hermitian(12, seed=20))
        x1 = random_orthonormal(12, 3, seed=21)
        x2 = random_orthonormal(12, 3, seed=22)
        m1 = convergence_metrics(x1, a.apply(x1))
        m2 = convergence_metrics(x2, a.apply(x2), prev_trace=m1.trace_value)
        t1 = float(np.trace(block_inner(x1, a.apply(x1))).real)
        t2 = float(np.trace(block_inner(x2, a.apply(x2))).real)
        assert abs(m2.rel_trace_change - abs(t2 - t1) / abs(t2)) < 1e-14

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_residual_metric_invariant_under_unitary_mixing(self, seed):
        a = DenseHermitian(random_dense_hermitian(15, seed=seed))
        x = random_orthonormal(15, 4, seed=seed + 1)
        u = np.linalg.qr(random_block(4, 4, seed=seed + 2))[0]
        m1 = convergence_metrics(x, a.apply(x))
        xu = x @ u
        m2 = convergence_metrics(xu, a.apply(xu))
        assert abs(m1.rel_subspace_residual - m2.rel_subspace_residual) < 1e-12


class TestDetectConverged:
    def test_all_zero_residuals_lock_everything(self):
        ritz = RitzResult(np.array([1.0, 2.0, 3.0]), np.eye(3), np.zeros(3))
        assert detect_converged(ritz, tol=1e-8) == [0, 1, 2]

    def test_prefix_closure_excludes_later_converged(self):
        ritz = RitzResult(np.array([1.0, 2.0, 3.0]), np.eye(3), np.array([0.0, 1.0, 0.0]))
        assert detect_converged(ritz, tol=1e-6) == [0]

    def test_relative_scale_uses_eigenvalue_magnitude(self):
        ritz = RitzResult(np.array([100.0, 0.5]), np.eye(2), np.array([5e-5, 5e-5]))
        # tol 1e-6: col 0 threshold 1e-4 (passes), col 1 threshold 1e-6 (fails)
        assert detect_converged(ritz, tol=1e-6) == [0]

    def test_matches_independent_recomputation_on_solver_snapshot(self):
        a_mat = np.diag(np.arange(1.0, 51.0))
        a = DenseHermitian(a_mat)
        s = random_block(50, 10, seed=30)
        res = rayleigh_ritz(a, s, want=10)
        tol = 1e-6
        locked = detect_converged(res, tol)
        expected = []
        for j in range(10):
            r = a_mat @ res.vectors[:, j] - res.values[j] * res.vectors[:, j]
            if np.linalg.norm(r) <= tol * max(abs(res.values[j]), 1.0):
                expected.append(j)
            else:
                break
        assert locked == expected
