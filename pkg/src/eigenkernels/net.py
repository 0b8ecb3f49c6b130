"""Small dense feed-forward networks with hand-written reverse-mode gradients.

Each network ends in an optional batch L2 normalizer: in train mode the
outputs are divided by sigma = sqrt(mean_b ||h_b||^2) computed on the
current batch, which pins the empirical second moment of the outputs to 1.
An exponential moving average of sigma is kept for eval mode, so a trained
network is an ordinary deterministic function.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import (
    ContractViolationError,
    DegenerateBatchError,
    InvalidInputError,
)

ACTIVATIONS = ("relu", "erf", "sincos")

_ERF_DERIV_COEF = 2.0 / np.sqrt(np.pi)


@dataclass(frozen=True)
class NetArch:
    """Shape and activation of a feed-forward network.

    `sincos` applies sin to the first half of each hidden layer and cos to
    the second half, so it requires even hidden widths.
    """

    in_dim: int
    hidden: tuple
    out_dim: int = 1
    activation: str = "sincos"
    has_l2bn: bool = True
    has_bias: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.in_dim < 1 or self.out_dim < 1 or any(h < 1 for h in self.hidden):
            raise InvalidInputError("all layer widths must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(
                f"unknown activation {self.activation!r}, expected one of {ACTIVATIONS}"
            )
        if self.activation == "sincos" and any(h % 2 for h in self.hidden):
            raise InvalidInputError("sincos activation requires even hidden widths")

    @property
    def widths(self) -> tuple:
        return (self.in_dim, *self.hidden, self.out_dim)

    @property
    def num_layers(self) -> int:
        return len(self.hidden) + 1

    def param_count(self) -> int:
        ws = self.widths
        total = sum(ws[i] * ws[i + 1] for i in range(len(ws) - 1))
        if self.has_bias:
            total += sum(ws[1:])
        return total


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "erf":
        return erf(z)
    half = z.shape[1] // 2
    out = np.empty_like(z)
    out[:, :half] = np.sin(z[:, :half])
    out[:, half:] = np.cos(z[:, half:])
    return out


def _activate_deriv(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(float)
    if kind == "erf":
        return _ERF_DERIV_COEF * np.exp(-z * z)
    half = z.shape[1] // 2
    out = np.empty_like(z)
    out[:, :half] = np.cos(z[:, :half])
    out[:, half:] = -np.sin(z[:, half:])
    return out


class FeedForwardNet:
    """A mutable dense network: parameters, batch-normalizer state, grad cache."""

    def __init__(self, arch: NetArch, weights, biases, ema_decay: float = 0.99,
                 ema_sigma=None):
        widths = arch.widths
        if len(weights) != arch.num_layers:
            raise InvalidInputError(
                f"expected {arch.num_layers} weight matrices, got {len(weights)}"
            )
        self.arch = arch
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        for l, w in enumerate(self.weights):
            if w.shape != (widths[l], widths[l + 1]):
                raise InvalidInputError(
                    f"layer {l} weight shape {w.shape} != {(widths[l], widths[l + 1])}"
                )
        if arch.has_bias:
            self.biases = [np.asarray(b, dtype=float) for b in biases]
            for l, b in enumerate(self.biases):
                if b.shape != (widths[l + 1],):
                    raise InvalidInputError(
                        f"layer {l} bias shape {b.shape} != {(widths[l + 1],)}"
                    )
        else:
            if biases:
                raise InvalidInputError("arch has no biases but bias arrays were given")
            self.biases = []
        if not 0.0 < ema_decay < 1.0:
            raise InvalidInputError("ema_decay must lie in (0, 1)")
        if ema_sigma is not None and ema_sigma <= 0.0:
            raise InvalidInputError("ema_sigma must be positive when set")
        self.ema_decay = float(ema_decay)
        self.ema_sigma = None if ema_sigma is None else float(ema_sigma)
        self._cache = None

    @classmethod
    def initialize(cls, arch: NetArch, rng: np.random.Generator,
                   weight_gain: float = 2.0, ema_decay: float = 0.99):
        """Gaussian init: weight variance weight_gain / fan_in, zero biases."""
        widths = arch.widths
        weights = [
            rng.normal(0.0, np.sqrt(weight_gain / widths[l]), size=(widths[l], widths[l + 1]))
            for l in range(arch.num_layers)
        ]
        biases = [np.zeros(widths[l + 1]) for l in range(arch.num_layers)] if arch.has_bias else []
        return cls(arch, weights, biases, ema_decay=ema_decay)

    def copy(self) -> "FeedForwardNet":
        return FeedForwardNet(
            self.arch,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            ema_decay=self.ema_decay,
            ema_sigma=self.ema_sigma,
        )

    # ---- parameter access -------------------------------------------------

    def params(self) -> list:
        """Parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for l in range(self.arch.num_layers):
            out.append(self.weights[l])
            if self.arch.has_bias:
                out.append(self.biases[l])
        return out

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat_params(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=float)
        expected = self.arch.param_count()
        if vec.shape != (expected,):
            raise InvalidInputError(f"expected {expected} parameters, got shape {vec.shape}")
        pos = 0
        for p in self.params():
            n = p.size
            p[...] = vec[pos:pos + n].reshape(p.shape)
            pos += n
        self._cache = None

    # ---- forward / backward ----------------------------------------------

    def _run_stack(self, x: np.ndarray):
        """Dense stack without the normalizer; returns (raw, inputs, preacts)."""
        inputs = [x]
        preacts = []
        h = x
        for l in range(self.arch.num_layers):
            z = h @ self.weights[l]
            if self.arch.has_bias:
                z = z + self.biases[l]
            preacts.append(z)
            if l < self.arch.num_layers - 1:
                h = _activate(z, self.arch.activation)
                inputs.append(h)
            else:
                h = z
        return h, inputs, preacts

    def forward(self, x, mode: str = "eval") -> np.ndarray:
        """Batched forward pass.

        Train mode normalizes by the batch sigma, updates its moving average,
        and caches intermediates for `vjp`.  Eval mode is a pure function of
        the stored parameters and moving average.
        """
        if mode not in ("train", "eval"):
            raise InvalidInputError(f"mode must be 'train' or 'eval', got {mode!r}")
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.arch.in_dim:
            raise InvalidInputError(
                f"expected input of shape (B, {self.arch.in_dim}), got {x.shape}"
            )
        if x.shape[0] < 1:
            raise InvalidInputError("batch must contain at least one row")
        raw, inputs, preacts = self._run_stack(x)
        if not self.arch.has_l2bn:
            if mode == "train":
                self._cache = {"x": x, "inputs": inputs, "preacts": preacts,
                               "sigma": None, "out": raw}
            return raw
        if mode == "train":
            sigma = float(np.sqrt(np.mean(np.sum(raw * raw, axis=1))))
            if sigma == 0.0:
                raise DegenerateBatchError("batch normalizer saw an all-zero batch")
            out = raw / sigma
            if self.ema_sigma is None:
                self.ema_sigma = sigma
            else:
                self.ema_sigma = self.ema_decay * self.ema_sigma \
                    + (1.0 - self.ema_decay) * sigma
            self._cache = {"x": x, "inputs": inputs, "preacts": preacts,
                           "sigma": sigma, "out": out}
            return out
        if self.ema_sigma is None:
            raise ContractViolationError(
                "eval-mode forward before any train-mode batch: ema_sigma is unset"
            )
        return raw / self.ema_sigma

    def vjp(self, x, cotangent) -> list:
        """Parameter gradients of cotangent . forward(x, 'train').

        Requires a cached train-mode forward for the same batch; the chain
        rule runs through the batch sigma, so rows of the batch interact.
        Returns arrays matching `params()` order.
        """
        cache = self._cache
        if cache is None:
            raise ContractViolationError("vjp requires a preceding train-mode forward")
        x = np.asarray(x, dtype=float)
        if cache["x"] is not x and not (
            cache["x"].shape == x.shape and np.array_equal(cache["x"], x)
        ):
            raise ContractViolationError("forward cache is stale for this batch")
        u = np.asarray(cotangent, dtype=float)
        if u.shape != cache["out"].shape:
            raise InvalidInputError(
                f"cotangent shape {u.shape} != output shape {cache['out'].shape}"
            )
        if self.arch.has_l2bn:
            sigma = cache["sigma"]
            y = cache["out"]
            batch = x.shape[0]
            # d/dh of u . (h / sigma(h)) with sigma^2 = mean_b ||h_b||^2
            g = (u - (np.sum(u * y) / batch) * y) / sigma
        else:
            g = u
        inputs = cache["inputs"]
        preacts = cache["preacts"]
        grad_w = [None] * self.arch.num_layers
        grad_b = [None] * self.arch.num_layers
        for l in range(self.arch.num_layers - 1, -1, -1):
            grad_w[l] = inputs[l].T @ g
            if self.arch.has_bias:
                grad_b[l] = g.sum(axis=0)
            if l > 0:
                g = (g @ self.weights[l].T) * _activate_deriv(
                    preacts[l - 1], self.arch.activation
                )
        out = []
        for l in range(self.arch.num_layers):
            out.append(grad_w[l])
            if self.arch.has_bias:
                out.append(grad_b[l])
        return out


def param_jacobian(net: FeedForwardNet, x) -> np.ndarray:
    """Dense Jacobian of the eval-mode network w.r.t. its parameters.

    Rows are (sample, output) pairs in sample-major order, columns follow
    `params()` flattening.  For a normalized net the moving-average sigma is
    treated as a constant, matching eval-mode semantics.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != net.arch.in_dim:
        raise InvalidInputError(
            f"expected input of shape (B, {net.arch.in_dim}), got {x.shape}"
        )
    if net.arch.has_l2bn and net.ema_sigma is None:
        raise ContractViolationError("jacobian of a normalized net requires ema_sigma")
    n, out_dim = x.shape[0], net.arch.out_dim
    raw, inputs, preacts = net._run_stack(x)
    total = net.arch.param_count()
    jac = np.empty((n * out_dim, total))
    for o in range(out_dim):
        # one backward pass per output coordinate, all samples at once
        g = np.zeros((n, out_dim))
        g[:, o] = 1.0
        rows = []
        for l in range(net.arch.num_layers - 1, -1, -1):
            gw = np.einsum("bi,bj->bij", inputs[l], g)
            if net.arch.has_bias:
                rows.insert(0, np.concatenate(
                    [gw.reshape(n, -1), g], axis=1))
            else:
                rows.insert(0, gw.reshape(n, -1))
            if l > 0:
                g = (g @ net.weights[l].T) * _activate_deriv(
                    preacts[l - 1], net.arch.activation
                )
        per_sample = np.concatenate(rows, axis=1)
        jac[o::out_dim, :] = per_sample
    if net.arch.has_l2bn:
        jac /= net.ema_sigma
    return jac


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter list."""

    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, lr: float):
    """One Adam update, in place, with bias correction."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise InvalidInputError("params, grads, and state must have matching lengths")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state
