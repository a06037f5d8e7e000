import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockeig.errors import DimensionError, ParseError, UnsupportedFormatError
from blockeig.problems import (
    jacobi_preconditioner,
    laplacian_1d,
    laplacian_3d,
    laplacian_plus_potential,
    random_hermitian,
    read_matrix_market,
    two_well_potential,
    well_problem,
    write_matrix_market,
)
from helpers import random_block, rng


def lap1d_eigenvalues(n):
    j = np.arange(1, n + 1)
    return 2.0 - 2.0 * np.cos(j * np.pi / (n + 1))


class TestMatrixMarket:
    def test_single_diagonal_entry(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 2.0\n")
        a = read_matrix_market(p)
        assert a.n == 2
        assert np.array_equal(a.to_dense(), [[2.0, 0.0], [0.0, 0.0]])

    def test_off_diagonal_is_mirrored(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 3.0\n")
        a = read_matrix_market(p)
        assert np.array_equal(a.to_dense(), [[0.0, 3.0], [3.0, 0.0]])

    def test_duplicates_are_summed(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n2 1 3.0\n2 1 1.5\n"
        )
        a = read_matrix_market(p)
        assert a.to_dense()[0, 1] == 4.5

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text(
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "% a comment\n\n3 3 1\n% another\n3 1 -1.0\n"
        )
        assert read_matrix_market(p).to_dense()[0, 2] == -1.0

    def test_complex_hermitian_mirror_conjugates(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text(
            "%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n"
            "1 1 1.0 0.0\n2 1 0.5 -0.25\n"
        )
        a = read_matrix_market(p).to_dense()
        assert a[1, 0] == 0.5 - 0.25j
        assert a[0, 1] == 0.5 + 0.25j

    def test_general_qualifier_rejected(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 2.0\n")
        with pytest.raises(UnsupportedFormatError):
            read_matrix_market(p)

    def test_pattern_field_rejected(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text("%%MatrixMarket matrix coordinate pattern symmetric\n2 2 1\n1 1\n")
        with pytest.raises(UnsupportedFormatError):
            read_matrix_market(p)

    def test_bad_header_reports_line_1(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text("not a matrix market file\n")
        with pytest.raises(ParseError) as exc:
            read_matrix_market(p)
        assert exc.value.line == 1

    def test_malformed_entry_reports_line(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2.0\n2 oops 3.0\n"
        )
        with pytest.raises(ParseError) as exc:
            read_matrix_market(p)
        assert exc.value.line == 4

    def test_out_of_range_index_reports_line(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n")
        with pytest.raises(ParseError) as exc:
            read_matrix_market(p)
        assert exc.value.line == 3

    def test_entry_count_mismatch(self, tmp_path):
        p = tmp_path / "a.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n")
        with pytest.raises(ParseError):
            read_matrix_market(p)

    def test_round_trip_is_bitwise_identity(self, tmp_path):
        a = random_hermitian(20, 0.3, seed=99)
        p = tmp_path / "rt.mtx"
        write_matrix_market(a, p)
        b = read_matrix_market(p)
        assert b.n == a.n and b.symmetry == a.symmetry
        da, db = a.to_dense(), b.to_dense()
        assert np.array_equal(da, db)

    def test_round_trip_complex(self, tmp_path):
        a = random_hermitian(12, 0.5, seed=7, complex_field=True)
        p = tmp_path / "rt.mtx"
        write_matrix_market(a, p)
        b = read_matrix_market(p)
        assert np.array_equal(a.to_dense(), b.to_dense())


class TestLaplacians:
    def test_lap1d_3_analytic(self):
        w = np.linalg.eigvalsh(laplacian_1d(3).to_dense())
        assert np.allclose(w, [2 - np.sqrt(2), 2.0, 2 + np.sqrt(2)])

    def test_lap3d_smallest_tensor_sum(self):
        a = laplacian_3d(2, 2, 2)
        w = np.linalg.eigvalsh(a.to_dense())
        assert np.isclose(w[0], 3.0 * (2 - 2 * np.cos(np.pi / 3)))

    def test_lap3d_spectrum_matches_tensor_sum_oracle(self):
        a = laplacian_3d(5, 4, 3)
        w = np.linalg.eigvalsh(a.to_dense())
        sums = [
            x + y + z
            for x in lap1d_eigenvalues(5)
            for y in lap1d_eigenvalues(4)
            for z in lap1d_eigenvalues(3)
        ]
        assert np.allclose(w, np.sort(sums), atol=1e-10)

    def test_zero_potential_equals_laplacian(self):
        a = laplacian_plus_potential(3, 2, 2, np.zeros(12))
        b = laplacian_3d(3, 2, 2)
        assert np.array_equal(a.to_dense(), b.to_dense())

    def test_constant_potential_shifts_spectrum(self):
        base = np.linalg.eigvalsh(laplacian_3d(3, 3, 2).to_dense())
        shifted = np.linalg.eigvalsh(laplacian_plus_potential(3, 3, 2, 1.5 * np.ones(18)).to_dense())
        assert np.allclose(shifted, base + 1.5, atol=1e-12)

    def test_potential_length_mismatch(self):
        with pytest.raises(DimensionError):
            laplacian_plus_potential(2, 2, 2, np.zeros(7))

    def test_well_problem_spectrum_is_clustered_in_pairs(self):
        a = well_problem(8, 8, 8, depth=40.0, seed=3)
        w = np.linalg.eigvalsh(a.to_dense())[:10]
        # mirror-image wells: the low spectrum comes in tight pairs
        pair_splits = w[1::2] - w[0::2]
        cluster_gaps = w[2::2] - w[1:-1:2]
        assert np.max(pair_splits) < 1e-6
        assert np.min(cluster_gaps) > 0.5


class TestRandomHermitian:
    def test_dense_when_density_one(self):
        a = random_hermitian(4, 1.0, seed=0).to_dense()
        assert np.array_equal(a, a.T)
        assert np.count_nonzero(a) == 16

    def test_deterministic_for_fixed_seed(self):
        a = random_hermitian(30, 0.2, seed=5).to_dense()
        b = random_hermitian(30, 0.2, seed=5).to_dense()
        assert np.array_equal(a, b)

    def test_complex_field_is_hermitian(self):
        a = random_hermitian(10, 0.6, seed=2, complex_field=True).to_dense()
        assert np.allclose(a, a.conj().T)
        assert np.allclose(np.diag(a).imag, 0)

    def test_density_validation(self):
        with pytest.raises(ValueError):
            random_hermitian(5, 0.0, seed=0)


class TestJacobiPreconditioner:
    def test_inverse_diagonal(self):
        from blockeig.problems import SparseHermitian
        import scipy.sparse as sp

        a = SparseHermitian(sp.diags([1.0, 2.0, 4.0]).tocsr(), "symmetric")
        t = jacobi_preconditioner(a, shift=0.0)
        assert np.allclose(t.d, [1.0, 0.5, 0.25])

    def test_floor_clamps_at_shift(self):
        from blockeig.problems import SparseHermitian
        import scipy.sparse as sp

        a = SparseHermitian(sp.diags([1.0, 2.0]).tocsr(), "symmetric")
        t = jacobi_preconditioner(a, shift=1.0)
        assert t.d[0] == 1.0 / 1e-8

    def test_apply_then_inverse_is_identity(self):
        a = random_hermitian(15, 0.5, seed=8)
        a_shift = a  # diagonal entries may be negative; clamp handles them
        t = jacobi_preconditioner(a_shift, shift=-10.0)
        x = random_block(15, 3, seed=9)
        back = (1.0 / t.d)[:, None] * t.apply(x)
        assert np.allclose(back, x, atol=1e-14)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_generated_operators_are_adjoint_symmetric(seed):
    ops = [
        laplacian_1d(17),
        laplacian_3d(3, 3, 3),
        well_problem(4, 4, 4, depth=10.0, seed=seed),
        random_hermitian(20, 0.3, seed=seed),
        random_hermitian(20, 0.3, seed=seed, complex_field=True),
    ]
    g = rng(seed)
    for op in ops:
        x = g.standard_normal(op.n) + (1j * g.standard_normal(op.n) if op.symmetry == "hermitian" else 0)
        y = g.standard_normal(op.n) + (1j * g.standard_normal(op.n) if op.symmetry == "hermitian" else 0)
        lhs = np.vdot(x, op.apply(y[:, None])[:, 0])
        rhs = np.conj(np.vdot(y, op.apply(x[:, None])[:, 0]))
        scale = max(1.0, abs(lhs))
        assert abs(lhs - rhs) < 1e-12 * scale
