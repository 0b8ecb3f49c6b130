"""Nystrom eigendecomposition: the classical oracle the learners are judged by.

Eigendecomposing the training Gram K gives operator eigenvalue estimates
mu_j = lambda_j / N and eigenfunction values sqrt(N) * u_j at the training
points (so each column of values has squared norm N, i.e. unit empirical
second moment).  Out-of-sample values follow from the eigenfunction
identity psi_j(x) = kappa(x, X) psi_j(X) / (N mu_j).
"""

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedError, InvalidInputError, NumericError
from .kernels import Dataset, KernelSpec, as_dataset, gram, output_dim
from .linalg import sym_eigh_topk

# eigenvalues below this fraction of mu_1 cannot be extended stably
EXTEND_FLOOR = 1e-12


@dataclass
class NystromModel:
    """Eigenvalues, training-point eigenfunction values, and their kernel."""

    mu_hat: np.ndarray
    train_values: np.ndarray
    points: Dataset
    kernel_spec: KernelSpec
    output_dim: int = 1

    @property
    def k(self) -> int:
        return self.mu_hat.shape[0]


def nystrom_fit(spec: KernelSpec, x_tr: Dataset, k: int) -> NystromModel:
    """Top-k eigenpairs of the kernel from a dense training Gram."""
    x_tr = as_dataset(x_tr)
    out = output_dim(spec)
    n = len(x_tr)
    if not 1 <= k <= n * out:
        raise InvalidInputError(f"k must lie in [1, {n * out}], got {k}")
    kernel = gram(spec, x_tr)
    pairs = sym_eigh_topk(kernel, k)
    mu = pairs.values / n
    if np.any(mu < -1e-10):
        raise NumericError(
            f"kernel matrix is significantly indefinite: min eigenvalue "
            f"{mu.min() * n:.3e}"
        )
    values = np.sqrt(n) * pairs.vectors
    return NystromModel(mu_hat=mu, train_values=values, points=x_tr,
                        kernel_spec=spec, output_dim=out)


def nystrom_extend(model: NystromModel, x: Dataset) -> np.ndarray:
    """Out-of-sample eigenfunction values, shape (n_x * out_dim, k).

    Refuses models holding near-null eigenvalues (<= 1e-12 * mu_1), whose
    extension would amplify roundoff unboundedly.  At the training points
    the extension reproduces the stored values up to solver residuals.
    """
    x = as_dataset(x)
    mu = model.mu_hat
    if mu[0] <= 0.0 or np.any(mu <= EXTEND_FLOOR * mu[0]):
        raise IllConditionedError(
            "model contains near-null eigenvalues; extension is ill-conditioned"
        )
    cross = gram(model.kernel_spec, x, model.points)
    return _extend_from_rows(model, cross)


def _extend_from_rows(model: NystromModel, cross: np.ndarray) -> np.ndarray:
    """Extension given precomputed kernel rows kappa(x, X_tr); linear in them."""
    n = len(model.points)
    return (cross @ model.train_values) / (n * model.mu_hat)[None, :]


def evaluate(model: NystromModel, x: Dataset) -> np.ndarray:
    """Eigenfunction values at x in the (n, k * out_dim) layout of the learner.

    Queries at the training points read the stored values directly (exact
    by the fixed-point identity); anything else goes through the extension.
    """
    x = as_dataset(x)
    if x is model.points or (
        x.points.shape == model.points.points.shape
        and np.array_equal(x.points, model.points.points)
    ):
        flat = model.train_values
    else:
        flat = nystrom_extend(model, x)
    n = flat.shape[0] // model.output_dim
    # (n*out, k) -> (n, k*out) with per-function column groups
    cube = flat.reshape(n, model.output_dim, model.k)
    return cube.transpose(0, 2, 1).reshape(n, model.k * model.output_dim)


def reconstruct_train(model: NystromModel) -> np.ndarray:
    """Truncated Mercer reconstruction of the training Gram."""
    return (model.train_values * model.mu_hat[None, :]) @ model.train_values.T
