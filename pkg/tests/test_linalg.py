"""Dense eigensolver, null spaces, Khatri-Rao, root finding."""
import numpy as np
import pytest

from graphfilt.errors import DegreeZero, DimensionMismatch, NotSymmetric
from graphfilt.linalg import (EigenDecomposition, khatri_rao,
                              null_space_basis, poly_roots, sym_eig)


def random_symmetric(rng, n):
    A = rng.normal(size=(n, n))
    return (A + A.T) / 2


class TestSymEig:
    def test_diagonal_matrix(self):
        eig = sym_eig(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(eig.eigenvalues, [1.0, 2.0, 3.0])
        # eigenvectors are signed unit vectors hitting the right slots
        V = np.abs(eig.eigenvectors)
        assert np.allclose(V[:, 0], [0, 1, 0], atol=1e-12)
        assert np.allclose(V[:, 2], [1, 0, 0], atol=1e-12)

    def test_k3_spectrum(self):
        # characteristic polynomial oracle: (lam - 2)(lam + 1)^2
        A = np.ones((3, 3)) - np.eye(3)
        eig = sym_eig(A)
        assert np.allclose(eig.eigenvalues, [-1.0, -1.0, 2.0], atol=1e-10)

    def test_reconstruction_random(self):
        rng = np.random.default_rng(17)
        S = random_symmetric(rng, 8)
        eig = sym_eig(S)
        V, lam = eig.eigenvectors, eig.eigenvalues
        assert np.max(np.abs(V @ np.diag(lam) @ V.T - S)) < 1e-10
        assert np.max(np.abs(V.T @ V - np.eye(8))) < 1e-10

    def test_matches_numpy_oracle(self):
        rng = np.random.default_rng(18)
        for n in (2, 5, 11):
            S = random_symmetric(rng, n)
            mine = sym_eig(S).eigenvalues
            ref = np.linalg.eigvalsh(S)
            assert np.max(np.abs(mine - ref)) < 1e-9

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetric):
            sym_eig(np.array([[0.0, 1.0], [0.5, 0.0]]))

    def test_zero_matrix(self):
        eig = sym_eig(np.zeros((3, 3)))
        assert np.array_equal(eig.eigenvalues, np.zeros(3))


class TestNullSpace:
    def test_zero_matrix_full_nullity(self):
        N = null_space_basis(np.zeros((2, 3)))
        assert N.shape == (3, 3)
        assert np.allclose(N.T @ N, np.eye(3), atol=1e-12)

    def test_identity_trivial_null_space(self):
        N = null_space_basis(np.eye(3))
        assert N.shape == (3, 0)

    def test_hand_row_reduction_case(self):
        A = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        N = null_space_basis(A)
        assert N.shape == (3, 1)
        want = np.array([1.0, -1.0, 0.0]) / np.sqrt(2)
        assert np.allclose(np.abs(N[:, 0]), np.abs(want), atol=1e-12)

    def test_invariants_on_random_rank_deficient(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            m, n, r = 6, 8, 4
            A = rng.normal(size=(m, r)) @ rng.normal(size=(r, n))
            N = null_space_basis(A, tol=1e-10)
            assert N.shape[1] == n - r
            scale = np.max(np.abs(A))
            assert np.max(np.abs(A @ N)) <= 10 * 1e-10 * scale
            assert np.max(np.abs(N.T @ N - np.eye(N.shape[1]))) < 1e-10


class TestKhatriRao:
    def test_row_vectors_elementwise(self):
        A = np.array([[1.0, 2.0, 3.0]])
        B = np.array([[4.0, 5.0, 6.0]])
        assert np.array_equal(khatri_rao(A, B), [[4.0, 10.0, 18.0]])

    def test_identity_columns(self):
        out = khatri_rao(np.eye(2), np.eye(2))
        want = np.zeros((4, 2))
        want[0, 0] = 1.0  # e1 kron e1
        want[3, 1] = 1.0  # e2 kron e2
        assert np.array_equal(out, want)

    def test_matches_index_formula(self):
        rng = np.random.default_rng(31)
        A = rng.normal(size=(3, 2))
        B = rng.normal(size=(2, 2))
        out = khatri_rao(A, B)
        for j in range(2):
            for i in range(3):
                for k in range(2):
                    assert out[i * 2 + k, j] == A[i, j] * B[k, j]

    def test_rejects_column_mismatch(self):
        with pytest.raises(DimensionMismatch):
            khatri_rao(np.eye(2), np.ones((2, 3)))


class TestPolyRoots:
    def test_linear(self):
        roots = poly_roots([1.0, 1.0])
        assert np.allclose(roots, [-1.0], atol=1e-12)

    def test_quadratic_real(self):
        roots = np.sort_complex(poly_roots([-1.0, 0.0, 1.0]))
        assert np.allclose(roots, [-1.0, 1.0], atol=1e-10)

    def test_quadratic_imaginary(self):
        roots = poly_roots([1.0, 0.0, 1.0])
        # evaluation oracle: residual at returned roots below 1e-10
        vals = roots ** 2 + 1.0
        assert np.max(np.abs(vals)) < 1e-10
        assert np.allclose(np.sort(roots.imag), [-1.0, 1.0], atol=1e-10)

    def test_rebuild_from_roots(self):
        rng = np.random.default_rng(41)
        for deg in range(1, 9):
            coeffs = rng.normal(size=deg + 1)
            coeffs[-1] = coeffs[-1] if abs(coeffs[-1]) > 0.3 else 1.0
            roots = poly_roots(coeffs)
            rebuilt = np.poly(roots) * coeffs[-1]  # descending coefficients
            want = coeffs[::-1]
            scale = np.max(np.abs(want))
            assert np.max(np.abs(rebuilt.real - want)) / scale < 1e-8

    def test_degree_zero_rejected(self):
        with pytest.raises(DegreeZero):
            poly_roots([2.0])


def test_eigendecomposition_is_frozen():
    eig = sym_eig(np.eye(2))
    assert isinstance(eig, EigenDecomposition)
    with pytest.raises(AttributeError):
        eig.eigenvalues = None
