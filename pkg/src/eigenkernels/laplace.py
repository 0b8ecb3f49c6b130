"""Linearised Laplace posteriors over network outputs, truncated to k modes.

The naive linearised posterior is the Gaussian process

    f | data ~ GP( g(x, theta), J_x Sigma J_x'^T ),
    Sigma^{-1} = sum_i J_{x_i}^T Lambda_i J_{x_i} + I / prior_variance,

whose covariance needs dim(theta)-sized solves.  Substituting the rank-k
Mercer expansion of the tangent kernel and applying the Woodbury identity
collapses this to a k x k problem in the scaled eigenfunction features
Phi(x) = [sqrt(mu_1) psi_1(x), ..., sqrt(mu_k) psi_k(x)]:

    cov(x, x') = Phi(x) [ sum_i Phi(x_i)^T Lambda_i Phi(x_i)
                          + I_k / prior_variance ]^{-1} Phi(x')^T.

With a full-rank expansion on the training points the two forms agree
exactly; the naive form is kept as a verification oracle for small nets.
"""

import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import InvalidInputError, NumericError, ResourceLimitError
from .kernels import Dataset, as_dataset
from .linalg import spd_solve, sym_eigh_topk
from .net import AdamState, FeedForwardNet, NetArch, adam_step, param_jacobian
from .nystrom import NystromModel
from .nystrom import evaluate as nystrom_evaluate
from .seeding import derive_rng
from .training import EigenfunctionModel
from .training import evaluate as model_evaluate

LAPLACE_PARAM_CAP = 10_000


@dataclass(frozen=True)
class Categorical:
    """Softmax likelihood; curvature diag(p) - p p^T at the current logits."""


@dataclass(frozen=True)
class GaussianRegression:
    """Gaussian likelihood with fixed noise variance; constant curvature."""

    noise_variance: float

    def __post_init__(self):
        if self.noise_variance <= 0.0:
            raise InvalidInputError("noise_variance must be positive")


LikelihoodSpec = Union[Categorical, GaussianRegression]


def prior_variance_from_weight_decay(n_train: int, weight_decay: float) -> float:
    """MAP training with L2 coefficient wd matches a prior variance 1/(N wd)."""
    if n_train < 1 or weight_decay <= 0.0:
        raise InvalidInputError("need n_train >= 1 and weight_decay > 0")
    return 1.0 / (n_train * weight_decay)


def _softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def lambda_matrix(logits: np.ndarray, likelihood: LikelihoodSpec) -> np.ndarray:
    """Negative log-likelihood curvature in output space at one point."""
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 1:
        raise InvalidInputError("logits must be a vector (one sample)")
    if isinstance(likelihood, GaussianRegression):
        return np.eye(logits.shape[0]) / likelihood.noise_variance
    if isinstance(likelihood, Categorical):
        p = _softmax(logits)
        return np.diag(p) - np.outer(p, p)
    raise InvalidInputError(f"unknown likelihood {type(likelihood).__name__}")


def _eigen_values(eigen, x: Dataset) -> np.ndarray:
    if isinstance(eigen, EigenfunctionModel):
        return model_evaluate(eigen, x)
    if isinstance(eigen, NystromModel):
        return nystrom_evaluate(eigen, x)
    raise InvalidInputError(
        f"eigen must be a trained eigenfunction or Nystrom model, "
        f"got {type(eigen).__name__}"
    )


def feature_map(eigen, x: Dataset) -> np.ndarray:
    """Scaled eigenfunction features, shape (n, out_dim, k).

    Entry [i] is the matrix whose column j is sqrt(mu_j) psi_j(x_i).
    Negative eigenvalue estimates are clipped to zero with a warning.
    """
    values = _eigen_values(eigen, x)
    mu = np.asarray(eigen.mu_hat, dtype=float)
    if np.any(mu < 0.0):
        warnings.warn(
            f"clipping {int(np.sum(mu < 0.0))} negative eigenvalue estimates to 0",
            RuntimeWarning,
        )
        mu = np.maximum(mu, 0.0)
    out = eigen.output_dim
    k = mu.shape[0]
    cube = values.reshape(values.shape[0], k, out).transpose(0, 2, 1)
    return cube * np.sqrt(mu)[None, None, :]


@dataclass
class LLAPosterior:
    """MAP network, truncated eigenbasis, and the k x k posterior precision."""

    map_net: FeedForwardNet
    eigen: Union[EigenfunctionModel, NystromModel]
    precision: np.ndarray
    prior_variance: float
    noise_scale: float = 1.0


def lla_fit(map_net: FeedForwardNet, eigen, train: Dataset,
            likelihood: LikelihoodSpec, prior_variance: float,
            noise_scale: float = 1.0) -> LLAPosterior:
    """Accumulate the k x k posterior precision over the training set.

    Streams the data once in fixed order; the result is deterministic and
    independent of batching because it is a plain sum.
    """
    if prior_variance <= 0.0:
        raise InvalidInputError("prior_variance must be positive")
    train = as_dataset(train)
    feats = feature_map(eigen, train)
    logits = map_net.forward(train.points, mode="eval")
    if logits.shape[1] != feats.shape[1]:
        raise InvalidInputError(
            "map net output dim does not match the eigenbasis output dim"
        )
    k = feats.shape[2]
    precision = np.eye(k) / prior_variance
    for i in range(len(train)):
        lam = lambda_matrix(logits[i], likelihood)
        precision += feats[i].T @ lam @ feats[i]
    precision = 0.5 * (precision + precision.T)
    if not np.all(np.isfinite(precision)):
        raise NumericError("posterior precision accumulated non-finite entries")
    return LLAPosterior(map_net=map_net, eigen=eigen, precision=precision,
                        prior_variance=prior_variance, noise_scale=noise_scale)


def lla_predict(posterior: LLAPosterior, x: Dataset,
                y: Optional[Dataset] = None):
    """Posterior mean at x and covariance blocks between x and y.

    Returns (mean, cov): mean (n_x, out_dim) from the MAP network, cov
    (n_x * out_dim, n_y * out_dim) in sample-major block layout.
    """
    x = as_dataset(x)
    if y is not None:
        y = as_dataset(y)
    mean = posterior.map_net.forward(x.points, mode="eval")
    feats_x = feature_map(posterior.eigen, x)
    out = feats_x.shape[1]
    k = feats_x.shape[2]
    phi_x = feats_x.reshape(-1, k)
    if y is None or y is x:
        phi_y = phi_x
    else:
        phi_y = feature_map(posterior.eigen, y).reshape(-1, k)
    cov = phi_x @ spd_solve(posterior.precision, phi_y.T)
    return mean, cov


def lla_naive_covariance(map_net: FeedForwardNet, train: Dataset,
                         likelihood: LikelihoodSpec, prior_variance: float,
                         x: Dataset, y: Optional[Dataset] = None) -> np.ndarray:
    """Covariance of the parameter-space linearised posterior (the oracle).

    Builds and inverts the full dim(theta) x dim(theta) precision, so it is
    capped to small networks.
    """
    if prior_variance <= 0.0:
        raise InvalidInputError("prior_variance must be positive")
    train = as_dataset(train)
    x = as_dataset(x)
    if y is not None:
        y = as_dataset(y)
    count = map_net.arch.param_count()
    if count > LAPLACE_PARAM_CAP:
        raise ResourceLimitError(
            f"naive covariance caps at {LAPLACE_PARAM_CAP} parameters, "
            f"network has {count}"
        )
    out = map_net.arch.out_dim
    jac_tr = param_jacobian(map_net, train.points)
    logits = map_net.forward(train.points, mode="eval")
    precision = np.eye(count) / prior_variance
    for i in range(len(train)):
        ji = jac_tr[i * out:(i + 1) * out, :]
        lam = lambda_matrix(logits[i], likelihood)
        precision += ji.T @ lam @ ji
    precision = 0.5 * (precision + precision.T)
    jac_x = param_jacobian(map_net, x.points)
    jac_y = jac_x if y is None or y is x else param_jacobian(map_net, y.points)
    return jac_x @ spd_solve(precision, jac_y.T)


def predictive_probs(posterior: LLAPosterior, x: Dataset, mc_samples: int = 256,
                     seed: int = 0) -> np.ndarray:
    """Monte Carlo averaged softmax probabilities under the posterior.

    Per point, samples logits from the marginal Gaussian (covariance
    eigenvalues clipped at zero with a warning if negative, noise optionally
    rescaled) and averages their softmax.  Zero covariance reduces to the
    MAP softmax exactly.
    """
    if mc_samples < 1:
        raise InvalidInputError("mc_samples must be >= 1")
    mean, cov = lla_predict(posterior, x, x)
    n, out = mean.shape
    rng = derive_rng(seed, "posterior-samples")
    probs = np.empty((n, out))
    clipped = 0
    for i in range(n):
        block = cov[i * out:(i + 1) * out, i * out:(i + 1) * out]
        pairs = sym_eigh_topk(0.5 * (block + block.T), out)
        vals = pairs.values
        if vals[-1] < 0.0:
            clipped += int(np.sum(vals < 0.0))
            vals = np.maximum(vals, 0.0)
        root = pairs.vectors * np.sqrt(vals)[None, :]
        draws = rng.standard_normal((mc_samples, out))
        logits = mean[i][None, :] + posterior.noise_scale * (draws @ root.T)
        probs[i] = _softmax(logits, axis=1).mean(axis=0)
    if clipped:
        warnings.warn(
            f"clipped {clipped} negative predictive covariance eigenvalues to 0",
            RuntimeWarning,
        )
    return probs


def train_map_classifier(arch: NetArch, data: Dataset, iterations: int = 500,
                         learning_rate: float = 1e-2, weight_decay: float = 1e-4,
                         seed: int = 0) -> FeedForwardNet:
    """Fit a small softmax classifier by full-batch Adam with L2 decay.

    Utility for building the MAP network the posterior linearises around;
    the weight decay ties to prior_variance_from_weight_decay.
    """
    if data.labels is None:
        raise InvalidInputError("classifier training needs labeled data")
    if arch.has_l2bn:
        raise InvalidInputError("classifier nets must not end in a batch normalizer")
    n = len(data)
    onehot = np.zeros((n, arch.out_dim))
    labels = np.asarray(data.labels, dtype=int)
    if labels.min() < 0 or labels.max() >= arch.out_dim:
        raise InvalidInputError("labels out of range for the arch output dim")
    onehot[np.arange(n), labels] = 1.0
    net = FeedForwardNet.initialize(arch, derive_rng(seed, "map-init"))
    state = AdamState.for_params(net.params())
    for _ in range(iterations):
        logits = net.forward(data.points, mode="train")
        cot = (_softmax(logits, axis=1) - onehot) / n
        grads = net.vjp(data.points, cot)
        for g, p in zip(grads, net.params()):
            g += weight_decay * p
        adam_step(net.params(), grads, state, learning_rate)
    return net
