"""Dense symmetric eigendecomposition and SPD solves.

The eigensolver is a cyclic Jacobi iteration.  It is meant for the dense,
modest-sized (up to a couple thousand rows) Gram matrices this package
produces, where its simplicity and high relative accuracy on small
eigenvalues matter more than raw speed.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NotSPDError, NumericError

MAX_JACOBI_SWEEPS = 100
# converged once the off-diagonal Frobenius mass falls below this times ||a||_F
OFFDIAG_TOL = 1e-12
# inputs may deviate from exact symmetry by at most this relative amount
ASYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class EigenPairs:
    """Top eigenvalues (descending) and matching unit-norm column eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def k(self) -> int:
        return self.values.shape[0]


def _as_symmetric(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix contains non-finite entries")
    scale = np.linalg.norm(a)
    if scale > 0.0 and np.linalg.norm(a - a.T) > ASYMMETRY_TOL * scale:
        raise InvalidInputError("matrix is not symmetric within 1e-10 relative tolerance")
    return 0.5 * (a + a.T)


def _offdiag_norm(a: np.ndarray) -> float:
    # summed directly (not as ||a||^2 minus the diagonal) to avoid cancellation
    sq = a * a
    np.fill_diagonal(sq, 0.0)
    return float(np.sqrt(np.sum(sq)))


def _jacobi_eigh(a: np.ndarray):
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps."""
    n = a.shape[0]
    mat = a.copy()
    vecs = np.eye(n)
    fro = np.linalg.norm(a)
    if n == 1 or fro == 0.0:
        return np.diag(mat).copy(), vecs
    tol = OFFDIAG_TOL * fro
    # entries below this cannot push the off-diagonal norm above tol
    skip = tol / n
    for _ in range(MAX_JACOBI_SWEEPS):
        if _offdiag_norm(mat) <= tol:
            return np.diag(mat).copy(), vecs
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = mat[p, q]
                if abs(apq) <= skip:
                    continue
                app = mat[p, p]
                aqq = mat[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                row_p = mat[p, :].copy()
                row_q = mat[q, :].copy()
                mat[p, :] = c * row_p - s * row_q
                mat[q, :] = s * row_p + c * row_q
                mat[:, p] = mat[p, :]
                mat[:, q] = mat[q, :]
                mat[p, p] = app - t * apq
                mat[q, q] = aqq + t * apq
                mat[p, q] = 0.0
                mat[q, p] = 0.0
                col_p = vecs[:, p].copy()
                col_q = vecs[:, q].copy()
                vecs[:, p] = c * col_p - s * col_q
                vecs[:, q] = s * col_p + c * col_q
    residual = _offdiag_norm(mat)
    if residual <= tol:
        return np.diag(mat).copy(), vecs
    raise NumericError(
        f"Jacobi iteration did not converge in {MAX_JACOBI_SWEEPS} sweeps; "
        f"off-diagonal residual {residual:.3e} exceeds tolerance {tol:.3e}"
    )


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # deterministic sign: the largest-magnitude entry of each column is positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0.0] = 1.0
    return vectors * signs


def sym_eigh_topk(a, k: int) -> EigenPairs:
    """Top-k eigenpairs of a symmetric matrix, eigenvalues descending.

    Deterministic up to the fixed sign convention: the largest-magnitude
    entry of every returned eigenvector is nonnegative.
    """
    a = _as_symmetric(a)
    n = a.shape[0]
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
        raise InvalidInputError(f"k must be an integer in [1, {n}], got {k!r}")
    values, vectors = _jacobi_eigh(a)
    order = np.argsort(-values, kind="stable")[:k]
    return EigenPairs(values=values[order], vectors=_fix_signs(vectors[:, order]))


def spd_solve(a, b) -> np.ndarray:
    """Solve a x = b for symmetric positive-definite a via Cholesky."""
    a = _as_symmetric(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise InvalidInputError(
            f"right-hand side has {b.shape[0]} rows, expected {a.shape[0]}"
        )
    if not np.all(np.isfinite(b)):
        raise InvalidInputError("right-hand side contains non-finite entries")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotSPDError(f"matrix is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)
