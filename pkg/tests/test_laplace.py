"""Linearised posterior over a truncated eigenbasis vs the dense oracle."""

import numpy as np
import pytest

from eigenkernels.datasets import two_moons
from eigenkernels.errors import InvalidInputError, ResourceLimitError
from eigenkernels.kernels import Dataset, PrecomputedGram, ntk_exact_gram
from eigenkernels.laplace import (
    Categorical,
    GaussianRegression,
    LLAPosterior,
    feature_map,
    lambda_matrix,
    lla_fit,
    lla_naive_covariance,
    lla_predict,
    predictive_probs,
    prior_variance_from_weight_decay,
    train_map_classifier,
)
from eigenkernels.net import FeedForwardNet, NetArch
from eigenkernels.nystrom import NystromModel, nystrom_fit
from eigenkernels.seeding import derive_rng


# ---- curvature matrices ---------------------------------------------------

def test_lambda_categorical_at_uniform_logits():
    lam = lambda_matrix(np.zeros(2), Categorical())
    assert np.allclose(lam, [[0.25, -0.25], [-0.25, 0.25]])


def test_lambda_categorical_rows_sum_to_zero():
    lam = lambda_matrix(np.array([2.0, -1.0, 0.5]), Categorical())
    assert np.allclose(lam.sum(axis=1), 0.0, atol=1e-15)
    assert np.allclose(lam, lam.T)
    assert np.linalg.eigvalsh(lam).min() > -1e-15


def test_lambda_gaussian_is_scaled_identity():
    lam = lambda_matrix(np.zeros(3), GaussianRegression(noise_variance=2.0))
    assert np.array_equal(lam, np.eye(3) / 2.0)


def test_lambda_rejects_batched_logits():
    with pytest.raises(InvalidInputError):
        lambda_matrix(np.zeros((2, 2)), Categorical())


def test_gaussian_likelihood_validation():
    with pytest.raises(InvalidInputError):
        GaussianRegression(noise_variance=0.0)


def test_prior_variance_from_weight_decay():
    assert prior_variance_from_weight_decay(100, 1e-3) == 10.0
    with pytest.raises(InvalidInputError):
        prior_variance_from_weight_decay(0, 1e-3)
    with pytest.raises(InvalidInputError):
        prior_variance_from_weight_decay(10, 0.0)


# ---- feature map ----------------------------------------------------------

def diag_gram_model():
    pts = Dataset(np.arange(2.0))
    spec = PrecomputedGram(np.diag([4.0, 1.0]), pts)
    return nystrom_fit(spec, pts, 2), pts


def test_feature_map_scales_by_sqrt_mu():
    model, pts = diag_gram_model()
    feats = feature_map(model, pts)
    assert feats.shape == (2, 1, 2)
    expect = model.train_values * np.sqrt(model.mu_hat)[None, :]
    assert np.allclose(feats[:, 0, :], expect)


def test_feature_map_outer_product_recovers_kernel():
    # full-rank features satisfy Phi Phi^T = K exactly
    model, pts = diag_gram_model()
    phi = feature_map(model, pts).reshape(2, 2)
    assert np.allclose(phi @ phi.T, np.diag([4.0, 1.0]), atol=1e-12)


def test_feature_map_clips_negative_eigenvalues():
    model, pts = diag_gram_model()
    hacked = NystromModel(mu_hat=np.array([2.0, -1e-3]),
                          train_values=model.train_values, points=model.points,
                          kernel_spec=model.kernel_spec)
    with pytest.warns(RuntimeWarning):
        feats = feature_map(hacked, pts)
    assert np.allclose(feats[:, 0, 1], 0.0)


def test_feature_map_rejects_foreign_models():
    with pytest.raises(InvalidInputError):
        feature_map(object(), Dataset(np.arange(2.0)))


# ---- posterior fit and prediction ----------------------------------------

def tiny_classifier_problem(n=16, k=None, seed=0):
    """MAP net plus a full-rank exact tangent-kernel eigenbasis on n points."""
    data = two_moons(n, noise=0.05, rng=derive_rng(seed, "data"))
    arch = NetArch(in_dim=2, hidden=(8,), out_dim=2, activation="erf",
                   has_l2bn=False)
    net = train_map_classifier(arch, data, iterations=200, learning_rate=1e-2,
                               weight_decay=1e-3, seed=seed)
    pts = Dataset(data.points)
    spec = PrecomputedGram(ntk_exact_gram(net, pts), pts, output_dim=2)
    eigen = nystrom_fit(spec, pts, k or 2 * n)
    return net, eigen, data


def test_precision_accumulation_matches_direct_formula():
    net, eigen, data = tiny_classifier_problem(n=8)
    post = lla_fit(net, eigen, data, GaussianRegression(1.0), prior_variance=2.0)
    feats = feature_map(eigen, data)
    k = feats.shape[2]
    phi = feats.reshape(-1, k)
    expect = np.eye(k) / 2.0 + phi.T @ phi  # Lambda = I for unit noise
    assert np.allclose(post.precision, expect, atol=1e-10)


@pytest.mark.parametrize("likelihood", [GaussianRegression(0.5), Categorical()])
def test_full_rank_posterior_matches_naive(likelihood):
    # with every eigenpair kept, the function-space posterior equals the
    # parameter-space linearised posterior exactly
    net, eigen, data = tiny_classifier_problem(n=12)
    post = lla_fit(net, eigen, data, likelihood, prior_variance=1.5)
    _, cov = lla_predict(post, data.points, data.points)
    ref = lla_naive_covariance(net, data.points, likelihood, 1.5,
                               data.points, data.points)
    rel = np.linalg.norm(cov - ref) / np.linalg.norm(ref)
    assert rel < 1e-6


def test_flat_curvature_recovers_scaled_prior():
    # near-zero likelihood curvature: covariance collapses to prior_variance
    # times the truncated kernel reconstruction
    net, eigen, data = tiny_classifier_problem(n=8)
    post = lla_fit(net, eigen, data, GaussianRegression(1e15), prior_variance=2.0)
    _, cov = lla_predict(post, data.points, data.points)
    phi = feature_map(eigen, data).reshape(-1, eigen.k)
    prior_cov = 2.0 * phi @ phi.T
    assert np.linalg.norm(cov - prior_cov) / np.linalg.norm(prior_cov) < 1e-9


def test_posterior_precision_symmetric_pd():
    net, eigen, data = tiny_classifier_problem(n=8)
    post = lla_fit(net, eigen, data, Categorical(), prior_variance=1.0)
    assert np.array_equal(post.precision, post.precision.T)
    assert np.linalg.eigvalsh(post.precision).min() > 0.0


def test_predict_cross_covariance_layout():
    # a closed-form kernel eigenbasis extends anywhere, so cross blocks can
    # mix training and fresh query points
    from eigenkernels.kernels import RBF

    x = derive_rng(4, "data").uniform(-1.0, 1.0, size=(10, 1))
    eigen = nystrom_fit(RBF(1.0), x, 4)
    arch = NetArch(in_dim=1, hidden=(4,), out_dim=1, activation="erf",
                   has_l2bn=False)
    net = FeedForwardNet.initialize(arch, derive_rng(4, "init"))
    post = lla_fit(net, eigen, x, GaussianRegression(1.0), prior_variance=1.0)
    fresh = np.array([[0.05], [-0.55], [0.4]])
    mean, cov = lla_predict(post, fresh, x)
    assert mean.shape == (3, 1)
    assert cov.shape == (3, 10)
    _, cov_t = lla_predict(post, x, fresh)
    assert np.allclose(cov, cov_t.T, atol=1e-10)
    _, cov_sym = lla_predict(post, fresh)
    assert np.allclose(cov_sym, cov_sym.T, atol=1e-12)


def test_lla_fit_validation():
    net, eigen, data = tiny_classifier_problem(n=8)
    with pytest.raises(InvalidInputError):
        lla_fit(net, eigen, data, Categorical(), prior_variance=0.0)
    scalar_eigen, pts = diag_gram_model()
    with pytest.raises(InvalidInputError):
        lla_fit(net, scalar_eigen, Dataset(np.ones((2, 2))), Categorical(), 1.0)


def test_naive_covariance_param_cap():
    arch = NetArch(in_dim=100, hidden=(100,), out_dim=2, activation="erf",
                   has_l2bn=False)
    net = FeedForwardNet.initialize(arch, derive_rng(0, "init"))
    with pytest.raises(ResourceLimitError):
        lla_naive_covariance(net, np.ones((2, 100)), Categorical(), 1.0,
                             np.ones((2, 100)))


# ---- predictive probabilities --------------------------------------------

def test_predictive_probs_rows_normalized():
    net, eigen, data = tiny_classifier_problem(n=8)
    post = lla_fit(net, eigen, data, Categorical(), prior_variance=1.0)
    probs = predictive_probs(post, data.points, mc_samples=32, seed=0)
    assert probs.shape == (8, 2)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert probs.min() >= 0.0


def test_zero_noise_scale_reduces_to_map_softmax():
    net, eigen, data = tiny_classifier_problem(n=8)
    post = lla_fit(net, eigen, data, Categorical(), prior_variance=1.0,
                   noise_scale=0.0)
    probs = predictive_probs(post, data.points, mc_samples=8, seed=3)
    logits = net.forward(data.points, mode="eval")
    expect = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    assert np.allclose(probs, expect, atol=1e-12)


def test_predictive_probs_deterministic():
    net, eigen, data = tiny_classifier_problem(n=8)
    post = lla_fit(net, eigen, data, Categorical(), prior_variance=1.0)
    a = predictive_probs(post, data.points, mc_samples=16, seed=5)
    b = predictive_probs(post, data.points, mc_samples=16, seed=5)
    assert np.array_equal(a, b)
    c = predictive_probs(post, data.points, mc_samples=16, seed=6)
    assert not np.array_equal(a, c)


def test_predictive_probs_rejects_bad_sample_count():
    net, eigen, data = tiny_classifier_problem(n=8)
    post = lla_fit(net, eigen, data, Categorical(), prior_variance=1.0)
    with pytest.raises(InvalidInputError):
        predictive_probs(post, data.points, mc_samples=0)


# ---- MAP classifier -------------------------------------------------------

def test_map_classifier_fits_separable_data():
    rng = derive_rng(2, "data")
    a = rng.normal([-2.0, 0.0], 0.3, size=(20, 2))
    b = rng.normal([2.0, 0.0], 0.3, size=(20, 2))
    data = Dataset(np.concatenate([a, b]),
                   labels=np.array([0] * 20 + [1] * 20))
    arch = NetArch(in_dim=2, hidden=(8,), out_dim=2, activation="erf",
                   has_l2bn=False)
    net = train_map_classifier(arch, data, iterations=300, learning_rate=1e-2,
                               weight_decay=1e-4, seed=0)
    pred = np.argmax(net.forward(data.points, mode="eval"), axis=1)
    assert np.mean(pred == data.labels) >= 0.975


def test_map_classifier_requires_labels():
    arch = NetArch(in_dim=2, hidden=(8,), out_dim=2, activation="erf",
                   has_l2bn=False)
    with pytest.raises(InvalidInputError):
        train_map_classifier(arch, Dataset(np.ones((4, 2))))


def test_map_classifier_rejects_l2bn():
    data = two_moons(8, noise=0.0, rng=derive_rng(0, "data"))
    arch = NetArch(in_dim=2, hidden=(8,), out_dim=2, activation="erf")
    with pytest.raises(InvalidInputError):
        train_map_classifier(arch, data)


def test_map_classifier_rejects_out_of_range_labels():
    data = Dataset(np.ones((3, 2)), labels=np.array([0, 1, 5]))
    arch = NetArch(in_dim=2, hidden=(8,), out_dim=2, activation="erf",
                   has_l2bn=False)
    with pytest.raises(InvalidInputError):
        train_map_classifier(arch, data)
