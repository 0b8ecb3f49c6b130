"""Model persistence (versioned JSON) and CSV matrix IO.

JSON numbers are written with Python's repr, which round-trips float64
exactly, so load(save(model)) evaluates bit-for-bit identically.  CSV
matrices are one row per line, comma separated, '.' decimal, no header.
"""

import json
import os

import numpy as np

from .errors import ModelFormatError
from .kernels import (
    Dataset,
    EmpiricalNTK,
    Linear,
    NNGPMonteCarlo,
    Polynomial,
    PrecomputedGram,
    PriorSpec,
    RBF,
    TrajectoryCovariance,
)
from .laplace import LLAPosterior
from .net import FeedForwardNet, NetArch
from .nystrom import NystromModel
from .training import EigenfunctionModel, TrainConfig

FORMAT_VERSION = 1


# ---- building blocks ------------------------------------------------------

def _arch_to_dict(arch: NetArch) -> dict:
    return {
        "in_dim": arch.in_dim,
        "hidden": list(arch.hidden),
        "out_dim": arch.out_dim,
        "activation": arch.activation,
        "has_l2bn": arch.has_l2bn,
        "has_bias": arch.has_bias,
    }


def _arch_from_dict(d: dict) -> NetArch:
    return NetArch(
        in_dim=int(d["in_dim"]),
        hidden=tuple(d["hidden"]),
        out_dim=int(d["out_dim"]),
        activation=d["activation"],
        has_l2bn=bool(d["has_l2bn"]),
        has_bias=bool(d["has_bias"]),
    )


def _net_to_dict(net: FeedForwardNet) -> dict:
    return {
        "arch": _arch_to_dict(net.arch),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "ema_decay": net.ema_decay,
        "ema_sigma": net.ema_sigma,
    }


def _net_from_dict(d: dict) -> FeedForwardNet:
    return FeedForwardNet(
        _arch_from_dict(d["arch"]),
        [np.asarray(w, dtype=float) for w in d["weights"]],
        [np.asarray(b, dtype=float) for b in d["biases"]],
        ema_decay=float(d["ema_decay"]),
        ema_sigma=None if d["ema_sigma"] is None else float(d["ema_sigma"]),
    )


def _dataset_to_dict(data: Dataset) -> dict:
    return {
        "points": data.points.tolist(),
        "labels": None if data.labels is None else data.labels.tolist(),
    }


def _dataset_from_dict(d: dict) -> Dataset:
    labels = d.get("labels")
    return Dataset(
        np.asarray(d["points"], dtype=float),
        None if labels is None else np.asarray(labels),
    )


def kernel_spec_to_dict(spec) -> dict:
    if isinstance(spec, Polynomial):
        return {"type": "polynomial", "offset": spec.offset, "degree": spec.degree}
    if isinstance(spec, RBF):
        return {"type": "rbf", "lengthscale_sq": spec.lengthscale_sq}
    if isinstance(spec, Linear):
        return {"type": "linear"}
    if isinstance(spec, PrecomputedGram):
        return {
            "type": "precomputed_gram",
            "gram": spec.gram.tolist(),
            "points": _dataset_to_dict(spec.points),
            "output_dim": spec.output_dim,
        }
    if isinstance(spec, NNGPMonteCarlo):
        return {
            "type": "nngp_mc",
            "arch": _arch_to_dict(spec.arch),
            "prior": {"weight_gain": spec.prior.weight_gain,
                      "bias_variance": spec.prior.bias_variance},
            "samples": spec.samples,
            "seed": spec.seed,
        }
    if isinstance(spec, EmpiricalNTK):
        return {
            "type": "empirical_ntk",
            "net": _net_to_dict(spec.net),
            "probes": spec.probes,
            "step": spec.step,
            "seed": spec.seed,
        }
    if isinstance(spec, TrajectoryCovariance):
        return {"type": "trajectory",
                "evals": [e.tolist() for e in spec.evals]}
    raise ModelFormatError(f"cannot serialize kernel spec {type(spec).__name__}")


def kernel_spec_from_dict(d: dict):
    kind = d.get("type")
    if kind == "polynomial":
        return Polynomial(offset=float(d["offset"]), degree=int(d["degree"]))
    if kind == "rbf":
        return RBF(lengthscale_sq=float(d["lengthscale_sq"]))
    if kind == "linear":
        return Linear()
    if kind == "precomputed_gram":
        return PrecomputedGram(
            gram=np.asarray(d["gram"], dtype=float),
            points=_dataset_from_dict(d["points"]),
            output_dim=int(d["output_dim"]),
        )
    if kind == "nngp_mc":
        return NNGPMonteCarlo(
            arch=_arch_from_dict(d["arch"]),
            prior=PriorSpec(weight_gain=float(d["prior"]["weight_gain"]),
                            bias_variance=float(d["prior"]["bias_variance"])),
            samples=int(d["samples"]),
            seed=int(d["seed"]),
        )
    if kind == "empirical_ntk":
        return EmpiricalNTK(
            net=_net_from_dict(d["net"]),
            probes=int(d["probes"]),
            step=float(d["step"]),
            seed=int(d["seed"]),
        )
    if kind == "trajectory":
        return TrajectoryCovariance(
            evals=tuple(np.asarray(e, dtype=float) for e in d["evals"])
        )
    raise ModelFormatError(f"unknown kernel spec type {kind!r}")


def _config_to_dict(config: TrainConfig) -> dict:
    return {
        "k": config.k,
        "batch_size": config.batch_size,
        "iterations": config.iterations,
        "learning_rate": config.learning_rate,
        "eigenvalue_ema_decay": config.eigenvalue_ema_decay,
        "seed": config.seed,
        "hidden": list(config.hidden),
        "activation": config.activation,
        "weight_gain": config.weight_gain,
        "l2bn_ema_decay": config.l2bn_ema_decay,
    }


def _config_from_dict(d: dict) -> TrainConfig:
    return TrainConfig(
        k=int(d["k"]),
        batch_size=int(d["batch_size"]),
        iterations=int(d["iterations"]),
        learning_rate=float(d["learning_rate"]),
        eigenvalue_ema_decay=float(d["eigenvalue_ema_decay"]),
        seed=int(d["seed"]),
        hidden=tuple(d["hidden"]),
        activation=d["activation"],
        weight_gain=float(d["weight_gain"]),
        l2bn_ema_decay=float(d["l2bn_ema_decay"]),
    )


# ---- top-level models -----------------------------------------------------

def _model_to_dict(model) -> dict:
    if isinstance(model, EigenfunctionModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "eigenfunction_model",
            "kernel_spec": kernel_spec_to_dict(model.kernel_spec),
            "config": _config_to_dict(model.config),
            "mu_hat": model.mu_hat.tolist(),
            "nets": [_net_to_dict(net) for net in model.nets],
        }
    if isinstance(model, NystromModel):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "nystrom_model",
            "kernel_spec": kernel_spec_to_dict(model.kernel_spec),
            "mu_hat": model.mu_hat.tolist(),
            "train_values": model.train_values.tolist(),
            "points": _dataset_to_dict(model.points),
            "output_dim": model.output_dim,
        }
    if isinstance(model, LLAPosterior):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "laplace_posterior",
            "map_net": _net_to_dict(model.map_net),
            "eigen": _model_to_dict(model.eigen),
            "precision": model.precision.tolist(),
            "prior_variance": model.prior_variance,
            "noise_scale": model.noise_scale,
        }
    raise ModelFormatError(f"cannot serialize model of type {type(model).__name__}")


def _model_from_dict(d: dict, path: str):
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: format_version {version!r} is not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    kind = d.get("kind")
    if kind == "eigenfunction_model":
        return EigenfunctionModel(
            nets=[_net_from_dict(nd) for nd in d["nets"]],
            mu_hat=np.asarray(d["mu_hat"], dtype=float),
            kernel_spec=kernel_spec_from_dict(d["kernel_spec"]),
            config=_config_from_dict(d["config"]),
        )
    if kind == "nystrom_model":
        return NystromModel(
            mu_hat=np.asarray(d["mu_hat"], dtype=float),
            train_values=np.asarray(d["train_values"], dtype=float),
            points=_dataset_from_dict(d["points"]),
            kernel_spec=kernel_spec_from_dict(d["kernel_spec"]),
            output_dim=int(d["output_dim"]),
        )
    if kind == "laplace_posterior":
        return LLAPosterior(
            map_net=_net_from_dict(d["map_net"]),
            eigen=_model_from_dict(d["eigen"], path),
            precision=np.asarray(d["precision"], dtype=float),
            prior_variance=float(d["prior_variance"]),
            noise_scale=float(d["noise_scale"]),
        )
    raise ModelFormatError(f"{path}: unknown model kind {kind!r}")


def save_model(model, path: str) -> None:
    """Write any trained model to a versioned JSON file."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str):
    """Read a model written by save_model; rejects foreign versions."""
    if not os.path.exists(path):
        raise ModelFormatError(f"model file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(
                f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                f"{exc.msg}"
            ) from exc
    if not isinstance(payload, dict):
        raise ModelFormatError(f"{path}: expected a JSON object at the top level")
    try:
        return _model_from_dict(payload, path)
    except KeyError as exc:
        raise ModelFormatError(f"{path}: missing field {exc}") from exc


# ---- CSV ------------------------------------------------------------------

def write_matrix_csv(path: str, matrix) -> None:
    """One row per line, comma separated, full-precision repr floats."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_matrix_csv(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        rows = [
            [float(tok) for tok in line.strip().split(",")]
            for line in fh
            if line.strip()
        ]
    return np.asarray(rows, dtype=float)
