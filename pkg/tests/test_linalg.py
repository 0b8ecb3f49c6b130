"""Eigensolver and SPD solve, checked against numpy and scipy results."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from eigenkernels.errors import InvalidInputError, NotSPDError
from eigenkernels.linalg import EigenPairs, spd_solve, sym_eigh_topk


def random_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def test_diagonal_matrix_exact():
    pairs = sym_eigh_topk(np.diag([3.0, 1.0]), 2)
    assert np.array_equal(pairs.values, [3.0, 1.0])
    assert np.array_equal(pairs.vectors, np.eye(2))
    assert pairs.k == 2


def test_one_by_one():
    pairs = sym_eigh_topk([[7.5]], 1)
    assert pairs.values[0] == 7.5
    assert pairs.vectors[0, 0] == 1.0


def test_zero_matrix():
    pairs = sym_eigh_topk(np.zeros((3, 3)), 3)
    assert np.array_equal(pairs.values, np.zeros(3))
    # columns stay orthonormal
    assert np.allclose(pairs.vectors.T @ pairs.vectors, np.eye(3))


@pytest.mark.parametrize("n", [2, 3, 5, 8, 16, 32])
def test_matches_numpy_eigh(n):
    a = random_symmetric(n, seed=n)
    pairs = sym_eigh_topk(a, n)
    ref = np.linalg.eigvalsh(a)[::-1]
    assert np.allclose(pairs.values, ref, atol=1e-10)
    # eigenvector residual: A v = lambda v
    resid = a @ pairs.vectors - pairs.vectors * pairs.values
    assert np.abs(resid).max() < 1e-10
    assert np.allclose(pairs.vectors.T @ pairs.vectors, np.eye(n), atol=1e-12)


def test_topk_truncation_keeps_largest():
    a = random_symmetric(10, seed=3)
    full = sym_eigh_topk(a, 10)
    top = sym_eigh_topk(a, 4)
    assert np.array_equal(top.values, full.values[:4])
    assert np.array_equal(top.vectors, full.vectors[:, :4])


def test_descending_order_and_sign_convention():
    a = random_symmetric(12, seed=9)
    pairs = sym_eigh_topk(a, 12)
    assert np.all(np.diff(pairs.values) <= 1e-12)
    idx = np.argmax(np.abs(pairs.vectors), axis=0)
    assert np.all(pairs.vectors[idx, np.arange(12)] >= 0.0)


def test_deterministic_repeat():
    a = random_symmetric(9, seed=21)
    p1 = sym_eigh_topk(a, 9)
    p2 = sym_eigh_topk(a, 9)
    assert np.array_equal(p1.values, p2.values)
    assert np.array_equal(p1.vectors, p2.vectors)


def test_degenerate_spectrum_orthonormal():
    # repeated eigenvalue: any orthonormal basis of the eigenspace is fine,
    # but the residual and orthonormality must still hold
    a = np.diag([2.0, 2.0, 1.0])
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
    a = q @ a @ q.T
    a = 0.5 * (a + a.T)
    pairs = sym_eigh_topk(a, 3)
    assert np.allclose(pairs.values, [2.0, 2.0, 1.0], atol=1e-10)
    resid = a @ pairs.vectors - pairs.vectors * pairs.values
    assert np.abs(resid).max() < 1e-9


@settings(max_examples=20)
@given(
    n=st.integers(min_value=1, max_value=8),
    seed=st.integers(min_value=0, max_value=2**31),
    shift=st.floats(min_value=-10.0, max_value=10.0),
)
def test_shift_moves_eigenvalues(n, seed, shift):
    a = random_symmetric(n, seed)
    base = sym_eigh_topk(a, n).values
    shifted = sym_eigh_topk(a + shift * np.eye(n), n).values
    assert np.allclose(shifted, base + shift, atol=1e-9)


@given(
    hnp.arrays(
        float,
        st.tuples(st.integers(2, 6), st.integers(2, 6)),
        elements=st.floats(-5.0, 5.0),
    )
)
def test_arbitrary_symmetrized_inputs(a):
    n = min(a.shape)
    s = 0.5 * (a[:n, :n] + a[:n, :n].T)
    pairs = sym_eigh_topk(s, n)
    assert np.allclose(pairs.values, np.linalg.eigvalsh(s)[::-1], atol=1e-8)


@pytest.mark.parametrize("bad_k", [0, -1, 5, 2.5, "2"])
def test_k_out_of_range(bad_k):
    a = np.eye(4)
    with pytest.raises(InvalidInputError):
        sym_eigh_topk(a, bad_k)


def test_rejects_nonsquare():
    with pytest.raises(InvalidInputError):
        sym_eigh_topk(np.ones((2, 3)), 1)


def test_rejects_asymmetric():
    a = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(InvalidInputError):
        sym_eigh_topk(a, 1)


def test_rejects_nonfinite():
    a = np.array([[1.0, np.nan], [np.nan, 1.0]])
    with pytest.raises(InvalidInputError):
        sym_eigh_topk(a, 1)


def test_eigenpairs_is_frozen():
    pairs = sym_eigh_topk(np.eye(2), 1)
    with pytest.raises(AttributeError):
        pairs.values = np.zeros(1)


# ---- spd_solve ------------------------------------------------------------

def test_spd_solve_residual():
    rng = np.random.default_rng(4)
    m = rng.standard_normal((8, 8))
    a = m @ m.T + 8 * np.eye(8)
    b = rng.standard_normal((8, 3))
    x = spd_solve(a, b)
    assert np.abs(a @ x - b).max() < 1e-10


def test_spd_solve_vector_rhs():
    a = np.diag([4.0, 9.0])
    x = spd_solve(a, np.array([8.0, 27.0]))
    assert np.allclose(x, [2.0, 3.0])


def test_spd_solve_rejects_indefinite():
    with pytest.raises(NotSPDError):
        spd_solve(np.diag([1.0, -1.0]), np.ones(2))


def test_spd_solve_rejects_shape_mismatch():
    with pytest.raises(InvalidInputError):
        spd_solve(np.eye(3), np.ones(2))


@settings(max_examples=20)
@given(
    n=st.integers(min_value=1, max_value=10),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_spd_solve_matches_numpy(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    a = m @ m.T + n * np.eye(n)
    b = rng.standard_normal(n)
    assert np.allclose(spd_solve(a, b), np.linalg.solve(a, b), atol=1e-8)
