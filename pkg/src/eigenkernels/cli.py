"""Command-line interface.

Commands (all take --config <json>, --seed <int>, --out <dir>):

* decompose   train k networks toward the top-k kernel eigenfunctions
* nystrom     dense eigendecomposition oracle on the same kernel
* compare     run both and report eigenvalues, alignments, timings
* project     evaluate a saved model on a dataset
* ntk-check   probe-estimated vs exact tangent kernel error curve
* lla         truncated Laplace posterior for a small classifier

Exit codes: 0 success, 2 configuration error, 3 numerical failure.

All randomness flows from --seed through named sub-streams, so outputs are
byte-identical across runs; wall-clock timings are the one exception and
are quarantined in timings.json.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import datasets, laplace, nystrom, training
from .errors import ConfigError, EigenkernelsError, NumericError
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
    gram,
    ntk_exact_gram,
    ntk_probe_gram,
)
from .net import FeedForwardNet, NetArch
from .seeding import derive_rng, derive_seed
from .serialize import (
    load_model,
    read_matrix_csv,
    save_model,
    write_matrix_csv,
)

_MISSING = object()


# ---- config plumbing ------------------------------------------------------

def _load_config(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                f"{exc.msg}"
            ) from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top-level config must be a JSON object")
    return cfg


def _check_keys(section: dict, allowed, context: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{context} must be a JSON object")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown field(s) {unknown} in {context}")


def _get(section: dict, key: str, context: str, default=_MISSING):
    if key in section:
        return section[key]
    if default is _MISSING:
        raise ConfigError(f"missing required field {key!r} in {context}")
    return default


def _parse_arch(section: dict, in_dim: int, context: str,
                default_out: int = 1, default_l2bn: bool = False) -> NetArch:
    _check_keys(section, ("hidden", "activation", "out_dim", "has_bias"), context)
    try:
        return NetArch(
            in_dim=in_dim,
            hidden=tuple(_get(section, "hidden", context)),
            out_dim=int(_get(section, "out_dim", context, default_out)),
            activation=_get(section, "activation", context, "relu"),
            has_l2bn=default_l2bn,
            has_bias=bool(_get(section, "has_bias", context, True)),
        )
    except EigenkernelsError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad network architecture in {context}: {exc}") from exc


def _parse_dataset(section: dict, seed: int, context: str,
                   stream: str = "data") -> Dataset:
    _check_keys(section, ("generator", "path", "labels_path"), context)
    if ("generator" in section) == ("path" in section):
        raise ConfigError(f"{context} needs exactly one of 'generator' or 'path'")
    if "path" in section:
        points = read_matrix_csv(section["path"])
        labels = None
        if "labels_path" in section:
            labels = read_matrix_csv(section["labels_path"]).ravel().astype(int)
        return Dataset(points, labels)
    gen = section["generator"]
    ctx = f"{context}.generator"
    _check_keys(gen, ("kind", "n", "noise", "bounds", "dim"), ctx)
    kind = _get(gen, "kind", ctx)
    n = int(_get(gen, "n", ctx))
    noise = float(_get(gen, "noise", ctx, datasets.DEFAULT_NOISE))
    bounds = _get(gen, "bounds", ctx, (-1.0, 1.0))
    dim = int(_get(gen, "dim", ctx, 1))
    return datasets.generate_dataset(kind, n, derive_rng(seed, stream),
                                     noise=noise, bounds=bounds, dim=dim)


def _parse_kernel(section: dict, data: Dataset, seed: int, context: str):
    _check_keys(
        section,
        ("type", "offset", "degree", "lengthscale_sq", "gram_csv", "output_dim",
         "arch", "prior", "samples", "probes", "step", "evals_csv"),
        context,
    )
    kind = _get(section, "type", context)
    if kind == "polynomial":
        return Polynomial(offset=float(_get(section, "offset", context)),
                          degree=int(_get(section, "degree", context)))
    if kind == "rbf":
        return RBF(lengthscale_sq=float(_get(section, "lengthscale_sq", context, 1.0)))
    if kind == "linear":
        return Linear()
    if kind == "precomputed_gram":
        matrix = read_matrix_csv(_get(section, "gram_csv", context))
        return PrecomputedGram(gram=matrix, points=data,
                               output_dim=int(_get(section, "output_dim", context, 1)))
    if kind == "nngp_mc":
        prior_section = _get(section, "prior", context, {})
        _check_keys(prior_section, ("weight_gain", "bias_variance"), f"{context}.prior")
        prior = PriorSpec(
            weight_gain=float(_get(prior_section, "weight_gain", context, 2.0)),
            bias_variance=float(_get(prior_section, "bias_variance", context, 1.0)),
        )
        arch = _parse_arch(_get(section, "arch", context), data.dim,
                           f"{context}.arch")
        return NNGPMonteCarlo(arch=arch, prior=prior,
                              samples=int(_get(section, "samples", context)),
                              seed=derive_seed(seed, "probes"))
    if kind == "empirical_ntk":
        arch = _parse_arch(_get(section, "arch", context), data.dim,
                           f"{context}.arch")
        net = FeedForwardNet.initialize(arch, derive_rng(seed, "kernel-net"))
        return EmpiricalNTK(net=net,
                            probes=int(_get(section, "probes", context)),
                            step=float(_get(section, "step", context, 1e-5)),
                            seed=derive_seed(seed, "probes"))
    if kind == "trajectory":
        paths = _get(section, "evals_csv", context)
        if not isinstance(paths, list) or len(paths) < 2:
            raise ConfigError(f"{context}.evals_csv must list at least 2 CSV files")
        return TrajectoryCovariance(evals=tuple(read_matrix_csv(p) for p in paths))
    raise ConfigError(f"unknown kernel type {kind!r} in {context}")


_TRAIN_KEYS = ("k", "batch_size", "iterations", "learning_rate",
               "eigenvalue_ema_decay", "hidden", "activation", "weight_gain",
               "l2bn_ema_decay")


def _parse_train(section: dict, seed: int, context: str) -> training.TrainConfig:
    _check_keys(section, _TRAIN_KEYS, context)
    defaults = training.TrainConfig(k=1)
    try:
        return training.TrainConfig(
            k=int(_get(section, "k", context)),
            batch_size=int(_get(section, "batch_size", context, defaults.batch_size)),
            iterations=int(_get(section, "iterations", context, defaults.iterations)),
            learning_rate=float(_get(section, "learning_rate", context,
                                     defaults.learning_rate)),
            eigenvalue_ema_decay=float(_get(section, "eigenvalue_ema_decay", context,
                                            defaults.eigenvalue_ema_decay)),
            seed=seed,
            hidden=tuple(_get(section, "hidden", context, defaults.hidden)),
            activation=_get(section, "activation", context, defaults.activation),
            weight_gain=float(_get(section, "weight_gain", context,
                                   defaults.weight_gain)),
            l2bn_ema_decay=float(_get(section, "l2bn_ema_decay", context,
                                      defaults.l2bn_ema_decay)),
        )
    except EigenkernelsError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad training section in {context}: {exc}") from exc


def _write_json(path: str, payload: dict) -> None:
    _assert_finite_report(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _assert_finite_report(obj) -> None:
    if isinstance(obj, dict):
        for v in obj.values():
            _assert_finite_report(v)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _assert_finite_report(v)
    elif isinstance(obj, float) and not np.isfinite(obj):
        raise NumericError("report contains a non-finite number")


def _write_dataset(out: str, data: Dataset, prefix: str = "") -> None:
    write_matrix_csv(os.path.join(out, f"{prefix}points.csv"), data.points)
    if data.labels is not None:
        write_matrix_csv(os.path.join(out, f"{prefix}labels.csv"),
                         data.labels.astype(float)[:, None])


def _alignment(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(abs(a @ b) / denom)


# ---- commands -------------------------------------------------------------

def _cmd_decompose(cfg: dict, seed: int, out: str) -> int:
    _check_keys(cfg, ("kernel", "dataset", "train"), "config")
    data = _parse_dataset(_get(cfg, "dataset", "config"), seed, "dataset")
    spec = _parse_kernel(_get(cfg, "kernel", "config"), data, seed, "kernel")
    config = _parse_train(_get(cfg, "train", "config"), seed, "train")
    model = training.train(spec, data, config)
    values = training.evaluate(model, data)
    save_model(model, os.path.join(out, "model.json"))
    write_matrix_csv(os.path.join(out, "eigenvalues.csv"), model.mu_hat[None, :])
    write_matrix_csv(os.path.join(out, "projections.csv"), values)
    _write_dataset(out, data)
    _write_json(os.path.join(out, "report.json"), {
        "command": "decompose",
        "seed": seed,
        "k": config.k,
        "n": len(data),
        "mu_hat": model.mu_hat.tolist(),
        "final_loss": model.history["loss"][-1],
    })
    print(f"decompose: trained k={config.k} on n={len(data)}; "
          f"mu_hat={np.array2string(model.mu_hat, precision=4)}")
    return 0


def _cmd_nystrom(cfg: dict, seed: int, out: str) -> int:
    _check_keys(cfg, ("kernel", "dataset", "k", "extend_dataset"), "config")
    data = _parse_dataset(_get(cfg, "dataset", "config"), seed, "dataset")
    spec = _parse_kernel(_get(cfg, "kernel", "config"), data, seed, "kernel")
    k = int(_get(cfg, "k", "config"))
    model = nystrom.nystrom_fit(spec, data, k)
    save_model(model, os.path.join(out, "model.json"))
    write_matrix_csv(os.path.join(out, "eigenvalues.csv"), model.mu_hat[None, :])
    write_matrix_csv(os.path.join(out, "train_values.csv"), model.train_values)
    _write_dataset(out, data)
    if "extend_dataset" in cfg:
        extra = _parse_dataset(cfg["extend_dataset"], seed, "extend_dataset",
                               stream="extend-data")
        write_matrix_csv(os.path.join(out, "extended.csv"),
                         nystrom.nystrom_extend(model, extra))
        _write_dataset(out, extra, prefix="extend_")
    _write_json(os.path.join(out, "report.json"), {
        "command": "nystrom",
        "seed": seed,
        "k": k,
        "n": len(data),
        "mu_hat": model.mu_hat.tolist(),
    })
    print(f"nystrom: k={k} on n={len(data)}; "
          f"mu_hat={np.array2string(model.mu_hat, precision=4)}")
    return 0


def _cmd_compare(cfg: dict, seed: int, out: str) -> int:
    _check_keys(cfg, ("kernel", "dataset", "train", "sample_sizes"), "config")
    dataset_cfg = _get(cfg, "dataset", "config")
    base_config = _parse_train(_get(cfg, "train", "config"), seed, "train")
    sizes = cfg.get("sample_sizes")
    if sizes is None:
        sizes = [None]
    elif not isinstance(sizes, list) or not sizes:
        raise ConfigError("sample_sizes must be a nonempty list of integers")
    runs = []
    timing_runs = []
    total_start = time.perf_counter()
    for size in sizes:
        if size is None:
            data = _parse_dataset(dataset_cfg, seed, "dataset")
        else:
            sized = json.loads(json.dumps(dataset_cfg))
            if "generator" not in sized:
                raise ConfigError("sample_sizes requires a generator dataset")
            sized["generator"]["n"] = int(size)
            data = _parse_dataset(sized, seed, "dataset")
        spec = _parse_kernel(_get(cfg, "kernel", "config"), data, seed, "kernel")
        n = len(data)
        t0 = time.perf_counter()
        learned = training.train(spec, data, base_config)
        t1 = time.perf_counter()
        oracle = nystrom.nystrom_fit(spec, data, base_config.k)
        t2 = time.perf_counter()
        values = training.evaluate(learned, data)
        oracle_values = nystrom.evaluate(oracle, data)
        ortho = values.T @ values / n
        alignments = [
            _alignment(values[:, j], oracle_values[:, j])
            for j in range(base_config.k)
        ]
        t3 = time.perf_counter()
        tag = f"n{n}"
        write_matrix_csv(os.path.join(out, f"learned_values_{tag}.csv"), values)
        write_matrix_csv(os.path.join(out, f"oracle_values_{tag}.csv"), oracle_values)
        write_matrix_csv(os.path.join(out, f"points_{tag}.csv"), data.points)
        runs.append({
            "n": n,
            "mu_hat": learned.mu_hat.tolist(),
            "mu_nystrom": oracle.mu_hat.tolist(),
            "eigenvalue_ratio": (learned.mu_hat / oracle.mu_hat).tolist(),
            "alignment": alignments,
            "orthonormality": ortho.tolist(),
        })
        timing_runs.append({
            "n": n,
            "train_s": t1 - t0,
            "nystrom_s": t2 - t1,
            "evaluate_s": t3 - t2,
        })
        print(f"compare n={n}: ratio="
              f"{np.array2string(learned.mu_hat / oracle.mu_hat, precision=3)} "
              f"alignment={np.array2string(np.asarray(alignments), precision=3)}")
    _write_json(os.path.join(out, "report.json"), {
        "command": "compare",
        "seed": seed,
        "k": base_config.k,
        "runs": runs,
    })
    _write_json(os.path.join(out, "timings.json"), {
        "runs": timing_runs,
        "total_s": time.perf_counter() - total_start,
    })
    return 0


def _cmd_project(cfg: dict, seed: int, out: str) -> int:
    _check_keys(cfg, ("model", "dataset"), "config")
    model = load_model(_get(cfg, "model", "config"))
    data = _parse_dataset(_get(cfg, "dataset", "config"), seed, "dataset")
    if isinstance(model, training.EigenfunctionModel):
        values = training.evaluate(model, data)
    elif isinstance(model, nystrom.NystromModel):
        values = nystrom.evaluate(model, data)
    else:
        raise ConfigError("project expects an eigenfunction or nystrom model")
    write_matrix_csv(os.path.join(out, "projections.csv"), values)
    _write_dataset(out, data)
    print(f"project: wrote {values.shape[0]}x{values.shape[1]} projections")
    return 0


def _cmd_ntk_check(cfg: dict, seed: int, out: str) -> int:
    _check_keys(cfg, ("arch", "dataset", "probe_counts", "repeats", "step"),
                "config")
    data = _parse_dataset(_get(cfg, "dataset", "config"), seed, "dataset")
    arch = _parse_arch(_get(cfg, "arch", "config"), data.dim, "arch")
    counts = _get(cfg, "probe_counts", "config")
    if not isinstance(counts, list) or not counts:
        raise ConfigError("probe_counts must be a nonempty list of integers")
    repeats = int(_get(cfg, "repeats", "config", 1))
    step = float(_get(cfg, "step", "config", 1e-5))
    net = FeedForwardNet.initialize(arch, derive_rng(seed, "init"))
    exact = ntk_exact_gram(net, data)
    exact_norm = float(np.linalg.norm(exact))
    rows = []
    medians = {}
    for count in counts:
        errs = []
        for rep in range(repeats):
            probe_seed = derive_seed(seed, f"probes-{count}-{rep}")
            est = ntk_probe_gram(net, data, int(count), step, probe_seed)
            err = float(np.linalg.norm(est - exact) / exact_norm)
            rows.append([float(count), float(rep), err])
            errs.append(err)
        medians[str(count)] = float(np.median(errs))
        print(f"ntk-check S={count}: median relative error {medians[str(count)]:.4f}")
    write_matrix_csv(os.path.join(out, "errors.csv"), np.asarray(rows))
    _write_json(os.path.join(out, "report.json"), {
        "command": "ntk-check",
        "seed": seed,
        "step": step,
        "param_count": arch.param_count(),
        "median_relative_error": medians,
    })
    return 0


def _cmd_lla(cfg: dict, seed: int, out: str) -> int:
    _check_keys(cfg, ("dataset", "classifier", "eigen", "prior_variance",
                      "mc_samples", "noise_scale", "predict_dataset"), "config")
    data = _parse_dataset(_get(cfg, "dataset", "config"), seed, "dataset")
    if data.labels is None:
        raise ConfigError("lla needs a labeled dataset")
    n_classes = int(np.max(data.labels)) + 1

    cls = _get(cfg, "classifier", "config")
    _check_keys(cls, ("hidden", "activation", "iterations", "learning_rate",
                      "weight_decay", "has_bias"), "classifier")
    arch = NetArch(
        in_dim=data.dim,
        hidden=tuple(_get(cls, "hidden", "classifier", (16,))),
        out_dim=n_classes,
        activation=_get(cls, "activation", "classifier", "erf"),
        has_l2bn=False,
        has_bias=bool(_get(cls, "has_bias", "classifier", True)),
    )
    weight_decay = float(_get(cls, "weight_decay", "classifier", 1e-4))
    map_net = laplace.train_map_classifier(
        arch, data,
        iterations=int(_get(cls, "iterations", "classifier", 500)),
        learning_rate=float(_get(cls, "learning_rate", "classifier", 1e-2)),
        weight_decay=weight_decay,
        seed=seed,
    )

    eig_cfg = _get(cfg, "eigen", "config")
    _check_keys(eig_cfg, ("method", "k", "ntk", "train"), "eigen")
    method = _get(eig_cfg, "method", "eigen", "nystrom")
    k = int(_get(eig_cfg, "k", "eigen"))
    ntk_cfg = _get(eig_cfg, "ntk", "eigen", {})
    _check_keys(ntk_cfg, ("estimator", "probes", "step"), "eigen.ntk")
    estimator = _get(ntk_cfg, "estimator", "eigen.ntk", "exact")
    if estimator == "exact":
        kernel_matrix = ntk_exact_gram(map_net, data)
        spec = PrecomputedGram(gram=kernel_matrix, points=data,
                               output_dim=n_classes)
    elif estimator == "probes":
        spec = EmpiricalNTK(net=map_net,
                            probes=int(_get(ntk_cfg, "probes", "eigen.ntk")),
                            step=float(_get(ntk_cfg, "step", "eigen.ntk", 1e-5)),
                            seed=derive_seed(seed, "probes"))
    else:
        raise ConfigError(f"unknown ntk estimator {estimator!r}")
    if method == "nystrom":
        eigen = nystrom.nystrom_fit(spec, data, k)
    elif method == "learned":
        train_cfg = dict(_get(eig_cfg, "train", "eigen", {}))
        train_cfg["k"] = k
        eigen = training.train(spec, data, _parse_train(train_cfg, seed, "eigen.train"))
    else:
        raise ConfigError(f"unknown eigen method {method!r}")

    prior_variance = cfg.get("prior_variance")
    if prior_variance is None:
        prior_variance = laplace.prior_variance_from_weight_decay(len(data),
                                                                  weight_decay)
    likelihood = laplace.Categorical()
    posterior = laplace.lla_fit(map_net, eigen, data, likelihood,
                                float(prior_variance),
                                noise_scale=float(cfg.get("noise_scale", 1.0)))
    if "predict_dataset" in cfg:
        pred_data = _parse_dataset(cfg["predict_dataset"], seed,
                                   "predict_dataset", stream="predict-data")
    else:
        pred_data = data
    mean, cov = laplace.lla_predict(posterior, pred_data, pred_data)
    probs = laplace.predictive_probs(posterior, pred_data,
                                     mc_samples=int(cfg.get("mc_samples", 256)),
                                     seed=seed)
    save_model(posterior, os.path.join(out, "posterior.json"))
    write_matrix_csv(os.path.join(out, "mean.csv"), mean)
    write_matrix_csv(os.path.join(out, "covariance.csv"), cov)
    write_matrix_csv(os.path.join(out, "probs.csv"), probs)
    _write_dataset(out, data)
    accuracy = float(np.mean(np.argmax(mean, axis=1) == pred_data.labels)) \
        if pred_data.labels is not None else None
    _write_json(os.path.join(out, "report.json"), {
        "command": "lla",
        "seed": seed,
        "k": k,
        "n": len(data),
        "prior_variance": float(prior_variance),
        "map_accuracy": accuracy,
        "mean_max_prob": float(np.mean(probs.max(axis=1))),
    })
    print(f"lla: k={k}, prior_variance={float(prior_variance):.4g}, "
          f"map accuracy={accuracy}")
    return 0


_COMMANDS = {
    "decompose": _cmd_decompose,
    "nystrom": _cmd_nystrom,
    "compare": _cmd_compare,
    "project": _cmd_project,
    "ntk-check": _cmd_ntk_check,
    "lla": _cmd_lla,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigenkernels",
        description="Learned kernel eigenfunctions, a Nystrom oracle, and "
                    "truncated Laplace posteriors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON config path")
        cmd.add_argument("--seed", type=int, default=0, help="run seed (u64)")
        cmd.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        cfg = _load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        return _COMMANDS[args.command](cfg, args.seed, args.out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EigenkernelsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
