"""Learning the top-k kernel eigenfunctions with k small networks.

Each of k networks represents one eigenfunction candidate.  Per batch we
form the quadratic forms R_ij = psi_i^T K psi_j / B^2 on the batch Gram
slice and descend the asymmetric objective

    loss = -sum_j ( R_jj - sum_{i<j} R_ij^2 / R_ii )

where every quantity indexed by i < j is treated as a constant (stop
gradient).  Network j therefore maximizes its Rayleigh quotient while being
penalized for aligning with the functions ranked above it; the ordering
breaks the symmetry and makes the j-th maximizer the j-th eigenfunction.
Gradients are computed analytically in function space and pulled back
through each network with one vector-Jacobian product.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, InvalidInputError, NumericError
from .kernels import Dataset, KernelSpec, as_dataset, gram, output_dim
from .net import AdamState, FeedForwardNet, NetArch, adam_step
from .seeding import derive_rng

# quadratic forms at or below this are treated as degenerate denominators
DEGENERATE_QUAD_FORM = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the eigenfunction learner.

    The batch size is clamped to the dataset size at training time.  The
    eigenvalue tracker is an EMA of the diagonal quadratic forms, assigned
    directly on the first iteration.
    """

    k: int
    batch_size: int = 256
    iterations: int = 2000
    learning_rate: float = 1e-3
    eigenvalue_ema_decay: float = 0.9
    seed: int = 0
    hidden: tuple = (32, 32)
    activation: str = "sincos"
    weight_gain: float = 2.0
    l2bn_ema_decay: float = 0.99

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")
        if self.batch_size < 2:
            raise InvalidInputError("batch_size must be >= 2")
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")
        if self.learning_rate <= 0.0:
            raise InvalidInputError("learning_rate must be positive")
        if not 0.0 <= self.eigenvalue_ema_decay < 1.0:
            raise InvalidInputError("eigenvalue_ema_decay must lie in [0, 1)")


@dataclass
class EigenfunctionModel:
    """k trained networks plus tracked eigenvalue estimates.

    mu_hat are operator eigenvalues under the empirical input distribution,
    directly comparable to Nystrom eigenvalues lambda_j / N.
    """

    nets: list
    mu_hat: np.ndarray
    kernel_spec: KernelSpec
    config: TrainConfig
    history: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def k(self) -> int:
        return len(self.nets)

    @property
    def output_dim(self) -> int:
        return self.nets[0].arch.out_dim


def batch_quadratic_forms(outputs: np.ndarray, kernel_matrix: np.ndarray,
                          out_dim: int = 1) -> np.ndarray:
    """R_ij = psi_i^T K psi_j / B^2 for stacked outputs (B*out_dim, k).

    B counts samples, not rows: matrix-valued kernels keep the 1/B^2
    scaling of the scalar case.
    """
    outputs = np.asarray(outputs, dtype=float)
    kernel_matrix = np.asarray(kernel_matrix, dtype=float)
    if outputs.ndim != 2:
        raise InvalidInputError("outputs must be a (B*out_dim, k) matrix")
    rows = outputs.shape[0]
    if rows % out_dim != 0:
        raise InvalidInputError("output rows are not a multiple of out_dim")
    if kernel_matrix.shape != (rows, rows):
        raise InvalidInputError(
            f"kernel matrix shape {kernel_matrix.shape} does not match {rows} rows"
        )
    batch = rows // out_dim
    quad = outputs.T @ kernel_matrix @ outputs
    quad = 0.5 * (quad + quad.T)
    return quad / float(batch) ** 2


def loss(outputs: np.ndarray, kernel_matrix: np.ndarray, out_dim: int = 1) -> float:
    """Training loss: negated rewards plus alignment penalties.

    Penalty terms whose (stop-gradient) denominator R_ii is at or below
    1e-12 are skipped with a warning.
    """
    quad = batch_quadratic_forms(outputs, kernel_matrix, out_dim)
    k = quad.shape[0]
    diag = np.diag(quad)
    total = float(np.sum(diag))
    for j in range(1, k):
        for i in range(j):
            if diag[i] <= DEGENERATE_QUAD_FORM:
                warnings.warn(
                    f"R_{i}{i} = {diag[i]:.3e} is degenerate; skipping the "
                    f"penalty of function {j} against function {i}",
                    RuntimeWarning,
                )
                continue
            total -= quad[i, j] ** 2 / diag[i]
    return -total


def surrogate_cotangents(outputs: np.ndarray, kernel_matrix: np.ndarray,
                         out_dim: int = 1) -> np.ndarray:
    """Function-space gradients of the loss w.r.t. each network's outputs.

    Column j is -(2/B^2) K (psi_j - sum_{i<j} (psi_i^T K psi_j)/(psi_i^T K
    psi_i) psi_i) with the i < j quantities held constant; feeding column j
    into network j's vjp yields its exact parameter gradient.
    """
    outputs = np.asarray(outputs, dtype=float)
    kernel_matrix = np.asarray(kernel_matrix, dtype=float)
    rows = outputs.shape[0]
    if rows % out_dim != 0:
        raise InvalidInputError("output rows are not a multiple of out_dim")
    batch = rows // out_dim
    k = outputs.shape[1]
    kpsi = kernel_matrix @ outputs
    quad = outputs.T @ kpsi
    diag = np.diag(quad)
    ratios = np.zeros((k, k))
    for j in range(1, k):
        for i in range(j):
            if diag[i] <= DEGENERATE_QUAD_FORM * float(batch) ** 2:
                warnings.warn(
                    f"R_{i}{i} is degenerate; dropping its pull on function {j}",
                    RuntimeWarning,
                )
                continue
            ratios[i, j] = quad[i, j] / diag[i]
    return (-2.0 / float(batch) ** 2) * (kpsi - kpsi @ ratios)


def _block_rows(idx: np.ndarray, out_dim: int) -> np.ndarray:
    if out_dim == 1:
        return idx
    return (idx[:, None] * out_dim + np.arange(out_dim)[None, :]).ravel()


def train(spec: KernelSpec, x_tr: Dataset, config: TrainConfig) -> EigenfunctionModel:
    """Train k networks toward the top-k eigenfunctions of the kernel.

    Materializes the training Gram once, then iterates mini-batches sampled
    without replacement (reshuffled each epoch, remainders dropped).  All k
    networks are updated simultaneously from the same batch.
    """
    x_tr = as_dataset(x_tr)
    n = len(x_tr)
    if n < 2:
        raise InvalidInputError("need at least 2 training points")
    out = output_dim(spec)
    batch_size = min(config.batch_size, n)
    arch = NetArch(x_tr.dim, config.hidden, out_dim=out,
                   activation=config.activation, has_l2bn=True)
    init_rng = derive_rng(config.seed, "init")
    nets = [
        FeedForwardNet.initialize(arch, init_rng, weight_gain=config.weight_gain,
                                  ema_decay=config.l2bn_ema_decay)
        for _ in range(config.k)
    ]
    states = [AdamState.for_params(net.params()) for net in nets]
    kernel_full = gram(spec, x_tr)
    if not np.all(np.isfinite(kernel_full)):
        raise NumericError("training Gram contains non-finite entries")

    batch_rng = derive_rng(config.seed, "batches")
    order = batch_rng.permutation(n)
    pos = 0
    mu = np.zeros(config.k)
    decay = config.eigenvalue_ema_decay
    history = {"loss": [], "min_diag": []}
    for it in range(config.iterations):
        if pos + batch_size > n:
            order = batch_rng.permutation(n)
            pos = 0
        idx = order[pos:pos + batch_size]
        pos += batch_size
        xb = x_tr.points[idx]
        rows = _block_rows(idx, out)
        kb = kernel_full[np.ix_(rows, rows)]
        psi = np.column_stack([net.forward(xb, mode="train").ravel() for net in nets])
        quad = batch_quadratic_forms(psi, kb, out)
        diag = np.diag(quad).copy()
        mu = diag if it == 0 else decay * mu + (1.0 - decay) * diag
        step_loss = loss(psi, kb, out)
        if not np.isfinite(step_loss):
            raise NumericError(
                f"non-finite loss at iteration {it}: loss={step_loss!r}, "
                f"R_jj={diag.tolist()}"
            )
        history["loss"].append(step_loss)
        history["min_diag"].append(float(diag.min()))
        cots = surrogate_cotangents(psi, kb, out)
        for j, net in enumerate(nets):
            grads = net.vjp(xb, cots[:, j].reshape(batch_size, out))
            adam_step(net.params(), grads, states[j], config.learning_rate)
    return EigenfunctionModel(nets=nets, mu_hat=mu, kernel_spec=spec,
                              config=config, history=history)


def evaluate(model: EigenfunctionModel, x: Dataset) -> np.ndarray:
    """Eval-mode values of all k functions at x, shape (n, k * out_dim).

    Columns are grouped per function: columns [j*out : (j+1)*out] hold
    function j's output coordinates.
    """
    x = as_dataset(x)
    for net in model.nets:
        if net.arch.has_l2bn and net.ema_sigma is None:
            raise ContractViolationError("model has untrained batch normalizers")
    return np.concatenate(
        [net.forward(x.points, mode="eval") for net in model.nets], axis=1
    )


def reconstruct_from_values(values_x: np.ndarray, values_y: np.ndarray,
                            mu_hat: np.ndarray, out_dim: int = 1) -> np.ndarray:
    """Truncated Mercer sum sum_j mu_j psi_j(x) psi_j(y)^T from tabulated values."""
    mu_hat = np.asarray(mu_hat, dtype=float)
    k = mu_hat.shape[0]
    phi_x = np.stack(
        [values_x[:, j * out_dim:(j + 1) * out_dim].ravel() for j in range(k)], axis=1
    )
    phi_y = np.stack(
        [values_y[:, j * out_dim:(j + 1) * out_dim].ravel() for j in range(k)], axis=1
    )
    return (phi_x * mu_hat[None, :]) @ phi_y.T


def reconstruct(model: EigenfunctionModel, x: Dataset,
                y: Dataset = None) -> np.ndarray:
    """Truncated kernel reconstruction between x and y (y defaults to x)."""
    values_x = evaluate(model, x)
    values_y = values_x if y is None or y is x else evaluate(model, y)
    return reconstruct_from_values(values_x, values_y, model.mu_hat,
                                   model.output_dim)
