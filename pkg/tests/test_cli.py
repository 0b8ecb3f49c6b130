"""Command-line entry points: happy paths, wiring, and exit codes."""

import json

import numpy as np
import pytest

from eigenkernels.cli import main
from eigenkernels.serialize import (
    load_model,
    read_matrix_csv,
    write_matrix_csv,
)
from eigenkernels.training import evaluate as model_evaluate


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


DECOMPOSE_CFG = {
    "kernel": {"type": "polynomial", "offset": 1.5, "degree": 4},
    "dataset": {"generator": {"kind": "uniform", "n": 16, "bounds": [-1, 1],
                              "dim": 1}},
    "train": {"k": 2, "batch_size": 16, "iterations": 30, "hidden": [8, 8]},
}


def run(cmd, cfg_path, out_dir, seed=0):
    return main([cmd, "--config", cfg_path, "--seed", str(seed),
                 "--out", str(out_dir)])


def test_decompose_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path, "d.json", DECOMPOSE_CFG)
    out = tmp_path / "out"
    assert run("decompose", cfg, out) == 0
    for name in ("model.json", "eigenvalues.csv", "projections.csv",
                 "points.csv", "report.json"):
        assert (out / name).exists()
    report = json.loads((out / "report.json").read_text())
    assert report["command"] == "decompose"
    assert report["k"] == 2 and report["n"] == 16
    mu_csv = read_matrix_csv(str(out / "eigenvalues.csv")).ravel()
    assert np.array_equal(mu_csv, np.asarray(report["mu_hat"]))
    assert "decompose" in capsys.readouterr().out

    # written projections must agree with reloading the model and evaluating
    model = load_model(str(out / "model.json"))
    pts = read_matrix_csv(str(out / "points.csv"))
    assert np.array_equal(read_matrix_csv(str(out / "projections.csv")),
                          model_evaluate(model, pts))


def test_decompose_byte_deterministic(tmp_path):
    cfg = write_config(tmp_path, "d.json", DECOMPOSE_CFG)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("decompose", cfg, a, seed=7) == 0
    assert run("decompose", cfg, b, seed=7) == 0
    for name in ("model.json", "eigenvalues.csv", "projections.csv",
                 "points.csv", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_decompose_seed_changes_data(tmp_path):
    cfg = write_config(tmp_path, "d.json", DECOMPOSE_CFG)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("decompose", cfg, a, seed=0) == 0
    assert run("decompose", cfg, b, seed=1) == 0
    assert (a / "points.csv").read_bytes() != (b / "points.csv").read_bytes()


def test_nystrom_with_extension(tmp_path):
    cfg = write_config(tmp_path, "n.json", {
        "kernel": {"type": "rbf", "lengthscale_sq": 1.0},
        "dataset": {"generator": {"kind": "uniform", "n": 12, "dim": 1}},
        "k": 3,
        "extend_dataset": {"generator": {"kind": "uniform", "n": 5, "dim": 1}},
    })
    out = tmp_path / "out"
    assert run("nystrom", cfg, out) == 0
    for name in ("model.json", "eigenvalues.csv", "train_values.csv",
                 "extended.csv", "extend_points.csv", "report.json"):
        assert (out / name).exists()
    assert read_matrix_csv(str(out / "extended.csv")).shape == (5, 3)
    model = load_model(str(out / "model.json"))
    assert model.k == 3


def test_project_reproduces_decompose_projections(tmp_path):
    cfg = write_config(tmp_path, "d.json", DECOMPOSE_CFG)
    out = tmp_path / "out"
    assert run("decompose", cfg, out, seed=3) == 0
    proj_cfg = write_config(tmp_path, "p.json", {
        "model": str(out / "model.json"),
        "dataset": DECOMPOSE_CFG["dataset"],  # same generator, same stream
    })
    out2 = tmp_path / "proj"
    assert run("project", proj_cfg, out2, seed=3) == 0
    assert (out / "projections.csv").read_bytes() \
        == (out2 / "projections.csv").read_bytes()


def test_compare_report_structure(tmp_path):
    cfg = write_config(tmp_path, "c.json", {
        "kernel": {"type": "linear"},
        "dataset": {"generator": {"kind": "uniform", "n": 16, "dim": 2}},
        "train": {"k": 2, "batch_size": 16, "iterations": 40,
                  "hidden": [8, 8]},
        "sample_sizes": [12, 16],
    })
    out = tmp_path / "out"
    assert run("compare", cfg, out) == 0
    report = json.loads((out / "report.json").read_text())
    assert [r["n"] for r in report["runs"]] == [12, 16]
    for r in report["runs"]:
        assert len(r["alignment"]) == 2
        assert len(r["eigenvalue_ratio"]) == 2
    for tag in ("n12", "n16"):
        assert (out / f"learned_values_{tag}.csv").exists()
        assert (out / f"oracle_values_{tag}.csv").exists()
    assert (out / "timings.json").exists()


def test_ntk_check_runs(tmp_path):
    cfg = write_config(tmp_path, "k.json", {
        "arch": {"hidden": [6], "activation": "erf"},
        "dataset": {"generator": {"kind": "uniform", "n": 6, "dim": 2,
                                  "bounds": [-1, 1]}},
        "probe_counts": [4, 64],
        "repeats": 2,
    })
    out = tmp_path / "out"
    assert run("ntk-check", cfg, out) == 0
    errors = read_matrix_csv(str(out / "errors.csv"))
    assert errors.shape == (4, 3)  # two counts x two repeats
    report = json.loads((out / "report.json").read_text())
    assert set(report["median_relative_error"]) == {"4", "64"}


def test_lla_end_to_end(tmp_path):
    cfg = write_config(tmp_path, "l.json", {
        "dataset": {"generator": {"kind": "two_moons", "n": 12,
                                  "noise": 0.05}},
        "classifier": {"hidden": [6], "activation": "erf", "iterations": 60,
                       "learning_rate": 0.01, "weight_decay": 0.001},
        "eigen": {"method": "nystrom", "k": 24,
                  "ntk": {"estimator": "exact"}},
        "mc_samples": 16,
    })
    out = tmp_path / "out"
    assert run("lla", cfg, out) == 0
    mean = read_matrix_csv(str(out / "mean.csv"))
    cov = read_matrix_csv(str(out / "covariance.csv"))
    probs = read_matrix_csv(str(out / "probs.csv"))
    assert mean.shape == (12, 2)
    assert cov.shape == (24, 24)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    posterior = load_model(str(out / "posterior.json"))
    assert posterior.precision.shape == (24, 24)
    report = json.loads((out / "report.json").read_text())
    assert 0.0 <= report["map_accuracy"] <= 1.0


def test_lla_learned_eigenbasis(tmp_path):
    cfg = write_config(tmp_path, "l.json", {
        "dataset": {"generator": {"kind": "two_moons", "n": 10,
                                  "noise": 0.05}},
        "classifier": {"hidden": [4], "activation": "erf", "iterations": 30},
        "eigen": {"method": "learned", "k": 2,
                  "ntk": {"estimator": "probes", "probes": 8},
                  "train": {"batch_size": 10, "iterations": 25,
                            "hidden": [8, 8]}},
        "mc_samples": 8,
    })
    out = tmp_path / "out"
    assert run("lla", cfg, out) == 0
    assert read_matrix_csv(str(out / "covariance.csv")).shape == (20, 20)


# ---- exit codes -----------------------------------------------------------

def test_missing_config_file_is_config_error(tmp_path):
    assert run("decompose", str(tmp_path / "nope.json"), tmp_path / "o") == 2


def test_invalid_json_is_config_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run("decompose", str(path), tmp_path / "o") == 2


def test_unknown_top_level_key_is_config_error(tmp_path):
    payload = dict(DECOMPOSE_CFG)
    payload["extra"] = 1
    cfg = write_config(tmp_path, "d.json", payload)
    assert run("decompose", cfg, tmp_path / "o") == 2


def test_unknown_kernel_type_is_config_error(tmp_path):
    payload = json.loads(json.dumps(DECOMPOSE_CFG))
    payload["kernel"] = {"type": "wavelet"}
    cfg = write_config(tmp_path, "d.json", payload)
    assert run("decompose", cfg, tmp_path / "o") == 2


def test_missing_required_field_is_config_error(tmp_path):
    payload = json.loads(json.dumps(DECOMPOSE_CFG))
    del payload["train"]
    cfg = write_config(tmp_path, "d.json", payload)
    assert run("decompose", cfg, tmp_path / "o") == 2


def test_negative_seed_is_config_error(tmp_path):
    cfg = write_config(tmp_path, "d.json", DECOMPOSE_CFG)
    assert run("decompose", cfg, tmp_path / "o", seed=-1) == 2


def test_unlabeled_lla_is_config_error(tmp_path):
    cfg = write_config(tmp_path, "l.json", {
        "dataset": {"generator": {"kind": "uniform", "n": 8, "dim": 2}},
        "classifier": {},
        "eigen": {"method": "nystrom", "k": 4},
    })
    assert run("lla", cfg, tmp_path / "o") == 2


def test_indefinite_gram_is_numeric_failure(tmp_path):
    # passes the loader's relative symmetry/PSD gates but fails the
    # decomposition's absolute eigenvalue floor
    gram_path = tmp_path / "gram.csv"
    write_matrix_csv(str(gram_path), np.diag([1.0e4, -5.0e-5]))
    pts_path = tmp_path / "pts.csv"
    write_matrix_csv(str(pts_path), np.array([[0.0], [1.0]]))
    cfg = write_config(tmp_path, "n.json", {
        "kernel": {"type": "precomputed_gram", "gram_csv": str(gram_path)},
        "dataset": {"path": str(pts_path)},
        "k": 2,
    })
    assert run("nystrom", cfg, tmp_path / "o") == 3
