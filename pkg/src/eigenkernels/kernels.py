"""Kernel specifications and Gram matrix construction.

A kernel is described declaratively by a small spec object; `gram` turns a
spec plus datasets into a dense (cross-)Gram matrix.  Matrix-valued kernels
use a sample-major block layout: block (i, j) of the output is the
out_dim x out_dim matrix kappa(x_i, x_j), so row index n * out_dim + o
addresses output coordinate o of sample n.

Three estimators build Grams from sampled networks:

* `nngp_mc_gram` averages outer products of independently drawn prior
  networks, a Monte Carlo estimate of the NN-GP kernel.
* `ntk_probe_gram` estimates the empirical neural tangent kernel of a fixed
  network from Rademacher-probed finite differences, never forming a
  Jacobian.
* `trajectory_gram` is the empirical covariance of recorded network
  evaluations along a training trajectory.

All estimators are deterministic given their seed; sums are accumulated in
a fixed sample order.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import (
    InvalidInputError,
    ResourceLimitError,
    UnsupportedExtensionError,
)
from .net import ACTIVATIONS, FeedForwardNet, NetArch, _activate, param_jacobian

NTK_PARAM_CAP = 10_000
_MC_CHUNK = 256


@dataclass(frozen=True)
class Dataset:
    """Sample points (n, d) with optional integer labels (n,)."""

    points: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidInputError(f"points must be a nonempty 2-D array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("points contain non-finite entries")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (pts.shape[0],):
                raise InvalidInputError(
                    f"labels shape {lab.shape} does not match {pts.shape[0]} points"
                )
            object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def as_dataset(x) -> Dataset:
    """Coerce a raw point array to a label-free Dataset (identity on Datasets)."""
    if isinstance(x, Dataset):
        return x
    return Dataset(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PriorSpec:
    """Gaussian prior over network parameters.

    Weight variance is weight_gain / fan_in per layer; biases are zero-mean
    with a fixed variance.
    """

    weight_gain: float = 2.0
    bias_variance: float = 1.0

    def __post_init__(self):
        if self.weight_gain <= 0.0:
            raise InvalidInputError("weight_gain must be positive")
        if self.bias_variance < 0.0:
            raise InvalidInputError("bias_variance must be nonnegative")


@dataclass(frozen=True)
class Polynomial:
    """kappa(x, y) = (x . y + offset) ** degree"""

    offset: float
    degree: int

    def __post_init__(self):
        if self.degree < 1:
            raise InvalidInputError("degree must be >= 1")


@dataclass(frozen=True)
class RBF:
    """kappa(x, y) = exp(-||x - y||^2 / (2 * lengthscale_sq))"""

    lengthscale_sq: float = 1.0

    def __post_init__(self):
        if self.lengthscale_sq <= 0.0:
            raise InvalidInputError("lengthscale_sq must be positive")


@dataclass(frozen=True)
class Linear:
    """kappa(x, y) = x . y"""


@dataclass(frozen=True)
class PrecomputedGram:
    """A kernel known only through its Gram matrix on fixed points."""

    gram: np.ndarray
    points: Dataset
    output_dim: int = 1

    def __post_init__(self):
        g = np.asarray(self.gram, dtype=float)
        n = len(self.points) * self.output_dim
        if g.shape != (n, n):
            raise InvalidInputError(
                f"gram shape {g.shape} does not match {len(self.points)} points "
                f"with output_dim {self.output_dim}"
            )
        if not np.all(np.isfinite(g)):
            raise InvalidInputError("gram contains non-finite entries")
        scale = np.linalg.norm(g)
        if scale > 0.0 and np.linalg.norm(g - g.T) > 1e-8 * scale:
            raise InvalidInputError("gram must be symmetric within 1e-8 relative")
        if scale > 0.0:
            min_eig = float(np.linalg.eigvalsh(0.5 * (g + g.T)).min())
            if min_eig < -1e-8 * scale:
                raise InvalidInputError(
                    f"gram is not PSD: smallest eigenvalue {min_eig:.3e}"
                )
        object.__setattr__(self, "gram", 0.5 * (g + g.T))


@dataclass(frozen=True)
class NNGPMonteCarlo:
    """MC estimate of the NN-GP kernel of `arch` under `prior` from S draws."""

    arch: NetArch
    prior: PriorSpec
    samples: int
    seed: int

    def __post_init__(self):
        if self.samples < 1:
            raise InvalidInputError("samples must be >= 1")


@dataclass(frozen=True)
class EmpiricalNTK:
    """Probe-estimated tangent kernel of a fixed network."""

    net: FeedForwardNet
    probes: int
    step: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.probes < 1:
            raise InvalidInputError("probes must be >= 1")
        if self.step <= 0.0:
            raise InvalidInputError("step must be positive")


@dataclass(frozen=True)
class TrajectoryCovariance:
    """Empirical covariance kernel of recorded evaluations g(X, theta_i).

    Each eval is an (n, out_dim) matrix of one checkpoint's outputs at the
    same n points, in the same order; the kernel is only defined there.
    """

    evals: tuple

    def __post_init__(self):
        evals = tuple(np.asarray(e, dtype=float) for e in self.evals)
        if len(evals) < 2:
            raise InvalidInputError("need at least 2 trajectory evaluations")
        first = evals[0]
        if first.ndim == 1:
            evals = tuple(e[:, None] for e in evals)
            first = evals[0]
        if first.ndim != 2:
            raise InvalidInputError("each eval must be an (n, out_dim) array")
        for e in evals:
            if e.shape != first.shape:
                raise InvalidInputError("all trajectory evals must share one shape")
            if not np.all(np.isfinite(e)):
                raise InvalidInputError("trajectory evals contain non-finite entries")
        object.__setattr__(self, "evals", evals)


KernelSpec = Union[
    Polynomial, RBF, Linear, PrecomputedGram, NNGPMonteCarlo, EmpiricalNTK,
    TrajectoryCovariance,
]


def output_dim(spec: KernelSpec) -> int:
    """Number of output coordinates per sample in the kernel's blocks."""
    if isinstance(spec, PrecomputedGram):
        return spec.output_dim
    if isinstance(spec, NNGPMonteCarlo):
        return spec.arch.out_dim
    if isinstance(spec, EmpiricalNTK):
        return spec.net.arch.out_dim
    if isinstance(spec, TrajectoryCovariance):
        return spec.evals[0].shape[1]
    return 1


# ---- closed-form kernels --------------------------------------------------

def _sq_dists(x: np.ndarray, y: np.ndarray, same: bool) -> np.ndarray:
    xx = np.sum(x * x, axis=1)
    yy = xx if same else np.sum(y * y, axis=1)
    d2 = xx[:, None] + yy[None, :] - 2.0 * (x @ y.T)
    np.maximum(d2, 0.0, out=d2)
    if same:
        np.fill_diagonal(d2, 0.0)
    return d2


# ---- sampled-network estimators -------------------------------------------

def _sample_prior_outputs(arch: NetArch, prior: PriorSpec, x: np.ndarray,
                          count: int, rng: np.random.Generator) -> np.ndarray:
    """Outputs of `count` fresh prior draws at x, shape (count, n, out)."""
    widths = arch.widths
    h = np.broadcast_to(x, (count, *x.shape))
    for l in range(arch.num_layers):
        w = rng.normal(0.0, np.sqrt(prior.weight_gain / widths[l]),
                       size=(count, widths[l], widths[l + 1]))
        z = h @ w
        if arch.has_bias:
            z = z + rng.normal(0.0, 1.0, size=(count, 1, widths[l + 1])) \
                * np.sqrt(prior.bias_variance)
        if l < arch.num_layers - 1:
            flat = z.reshape(-1, widths[l + 1])
            h = _activate(flat, arch.activation).reshape(z.shape)
        else:
            h = z
    return h


def nngp_mc_gram(arch: NetArch, prior: PriorSpec, x: Dataset,
                 samples: int, seed: int) -> np.ndarray:
    """(1/S) sum_s g(X, theta_s) g(X, theta_s)^T over S prior draws.

    PSD by construction; accumulated chunk by chunk in sample order so the
    result is bit-reproducible for a given seed.
    """
    if samples < 1:
        raise InvalidInputError("samples must be >= 1")
    pts = x.points
    if pts.shape[1] != arch.in_dim:
        raise InvalidInputError(
            f"points have dim {pts.shape[1]}, arch expects {arch.in_dim}"
        )
    rng = np.random.default_rng(seed)
    n_flat = len(x) * arch.out_dim
    total = np.zeros((n_flat, n_flat))
    done = 0
    while done < samples:
        count = min(_MC_CHUNK, samples - done)
        outs = _sample_prior_outputs(arch, prior, pts, count, rng)
        feats = outs.reshape(count, n_flat)
        total += feats.T @ feats
        done += count
    return total / samples


def ntk_probe_gram(net: FeedForwardNet, x: Dataset, probes: int,
                   step: float = 1e-5, seed: int = 0) -> np.ndarray:
    """Finite-difference Rademacher-probe estimate of the tangent kernel.

    Uses S + 1 forward passes and never materializes a Jacobian.  Unbiased
    up to curvature; exact with a single probe for a one-parameter affine
    network, where the squared Rademacher sign is identically 1.
    """
    if probes < 1:
        raise InvalidInputError("probes must be >= 1")
    if step <= 0.0:
        raise InvalidInputError("step must be positive")
    work = net.copy()
    theta = work.flat_params()
    base = work.forward(x.points, mode="eval").ravel()
    rng = np.random.default_rng(seed)
    n_flat = base.shape[0]
    total = np.zeros((n_flat, n_flat))
    for _ in range(probes):
        v = rng.integers(0, 2, size=theta.shape[0]).astype(float) * 2.0 - 1.0
        work.set_flat_params(theta + step * v)
        delta = (work.forward(x.points, mode="eval").ravel() - base) / step
        total += np.outer(delta, delta)
    return total / probes


def ntk_exact_gram(net: FeedForwardNet, x: Dataset) -> np.ndarray:
    """Dense-Jacobian tangent kernel J J^T; an oracle for small networks."""
    count = net.arch.param_count()
    if count > NTK_PARAM_CAP:
        raise ResourceLimitError(
            f"exact tangent kernel caps at {NTK_PARAM_CAP} parameters, "
            f"network has {count}"
        )
    jac = param_jacobian(net, x.points)
    return jac @ jac.T


def trajectory_gram(evals) -> np.ndarray:
    """Covariance kernel (1/M) sum_i (g_i - gbar)(g_i - gbar)^T."""
    evals = tuple(np.asarray(e, dtype=float) for e in evals)
    if len(evals) < 2:
        raise InvalidInputError("need at least 2 trajectory evaluations")
    stack = np.stack([e.ravel() for e in evals], axis=0)
    stack = stack - stack.mean(axis=0, keepdims=True)
    return (stack.T @ stack) / stack.shape[0]


# ---- unified gram ---------------------------------------------------------

def _points_match(a: Dataset, b: Dataset) -> bool:
    return a is b or (a.points.shape == b.points.shape
                      and np.array_equal(a.points, b.points))


def gram(spec: KernelSpec, x: Dataset, y: Optional[Dataset] = None) -> np.ndarray:
    """Dense (cross-)Gram of the kernel between datasets x and y.

    With y omitted (or equal to x) the symmetric training Gram is returned.
    Kernels defined only on their training points (PrecomputedGram,
    TrajectoryCovariance) reject any other query.
    """
    x = as_dataset(x)
    if y is not None:
        y = as_dataset(y)
    same = y is None or _points_match(x, y)
    if isinstance(spec, (Polynomial, RBF, Linear)):
        xp = x.points
        yp = xp if same else y.points
        if not same and yp.shape[1] != xp.shape[1]:
            raise InvalidInputError("x and y must share the ambient dimension")
        if isinstance(spec, Polynomial):
            return (xp @ yp.T + spec.offset) ** spec.degree
        if isinstance(spec, Linear):
            return xp @ yp.T
        d2 = _sq_dists(xp, yp, same)
        return np.exp(-d2 / (2.0 * spec.lengthscale_sq))
    if isinstance(spec, PrecomputedGram):
        if not (_points_match(spec.points, x) and same):
            raise UnsupportedExtensionError(
                "a precomputed Gram kernel only supports its own training points"
            )
        return spec.gram.copy()
    if isinstance(spec, TrajectoryCovariance):
        if not same or len(x) != spec.evals[0].shape[0]:
            raise UnsupportedExtensionError(
                "a trajectory covariance kernel only supports the points its "
                "evaluations were recorded at"
            )
        return trajectory_gram(spec.evals)
    if isinstance(spec, NNGPMonteCarlo):
        if same:
            return nngp_mc_gram(spec.arch, spec.prior, x, spec.samples, spec.seed)
        if y.dim != x.dim:
            raise InvalidInputError("x and y must share the ambient dimension")
        stacked = Dataset(np.concatenate([x.points, y.points], axis=0))
        full = nngp_mc_gram(spec.arch, spec.prior, stacked, spec.samples, spec.seed)
        split = len(x) * spec.arch.out_dim
        return full[:split, split:]
    if isinstance(spec, EmpiricalNTK):
        if same:
            return ntk_probe_gram(spec.net, x, spec.probes, spec.step, spec.seed)
        if y.dim != x.dim:
            raise InvalidInputError("x and y must share the ambient dimension")
        stacked = Dataset(np.concatenate([x.points, y.points], axis=0))
        full = ntk_probe_gram(spec.net, stacked, spec.probes, spec.step, spec.seed)
        split = len(x) * spec.net.arch.out_dim
        return full[:split, split:]
    raise InvalidInputError(f"unknown kernel spec {type(spec).__name__}")
