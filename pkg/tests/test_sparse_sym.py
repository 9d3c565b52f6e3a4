import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_sparse
from psdcomplete.sparse_sym import SparseSymMatrix, matvec, quadratic_form


def test_matvec_diagonal():
    A = SparseSymMatrix.from_entries(2, [(0, 0, 3.0), (1, 1, 1.0)])
    np.testing.assert_array_equal(matvec(A, np.ones(2)), [3.0, 1.0])


def test_matvec_single_off_diagonal_is_symmetric():
    A = SparseSymMatrix.from_entries(2, [(0, 1, 2.0)])
    np.testing.assert_array_equal(matvec(A, [1.0, 0.0]), [0.0, 2.0])


def test_matvec_matches_dense(rng):
    A = random_sparse(50, 200, rng)
    x = rng.standard_normal(50)
    assert np.max(np.abs(matvec(A, x) - A.to_dense() @ x)) <= 1e-12


def test_quadratic_form_identity_orthonormal(rng):
    I = SparseSymMatrix(6, np.arange(6), np.arange(6), np.ones(6))
    V, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    np.testing.assert_allclose(quadratic_form(I, V), np.eye(3), atol=1e-12)


def test_quadratic_form_zero(rng):
    Z = SparseSymMatrix(5, [], [], [])
    assert np.all(quadratic_form(Z, rng.standard_normal((5, 2))) == 0.0)


def test_quadratic_form_matches_dense(rng):
    A = random_sparse(30, 90, rng)
    V = rng.standard_normal((30, 3))
    G = quadratic_form(A, V)
    assert np.max(np.abs(G - V.T @ A.to_dense() @ V)) <= 1e-10
    np.testing.assert_array_equal(G, G.T)


def test_from_dense_round_trip(rng):
    B = rng.standard_normal((7, 7))
    B = B + B.T
    np.testing.assert_array_equal(SparseSymMatrix.from_dense(B).to_dense(), B)


@pytest.mark.parametrize(
    "rows, cols, msg",
    [
        ([0, 0], [1, 1], "duplicate"),
        ([1], [0], "i <= j"),
        ([0], [3], "out of range"),
    ],
)
def test_construction_errors(rows, cols, msg):
    with pytest.raises(ValueError, match=msg):
        SparseSymMatrix(3, rows, cols, np.ones(len(rows)))


def test_dimension_mismatch():
    A = SparseSymMatrix(3, [0], [0], [1.0])
    with pytest.raises(ValueError):
        A.matvec(np.ones(4))
    with pytest.raises(ValueError):
        A.quadratic_form(np.ones((2, 2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**31 - 1))
def test_symmetry_of_operator(n, seed):
    rng = np.random.default_rng(seed)
    A = random_sparse(n, 2 * n, rng)
    x, y = rng.standard_normal((2, n))
    lhs, rhs = matvec(A, x) @ y, x @ matvec(A, y)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_quadratic_form_entries(n, k, seed):
    rng = np.random.default_rng(seed)
    A = random_sparse(n, 3 * n, rng)
    V = rng.standard_normal((n, k))
    G = quadratic_form(A, V)
    for p in range(k):
        for q in range(k):
            assert abs(G[p, q] - V[:, p] @ matvec(A, V[:, q])) <= 1e-10 * (1 + abs(G[p, q]))
