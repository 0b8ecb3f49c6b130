"""Learned kernel eigenfunctions with a Nystrom oracle and Laplace posteriors."""

from .errors import (
    ConfigError,
    ContractViolationError,
    DegenerateBatchError,
    EigenkernelsError,
    IllConditionedError,
    InvalidInputError,
    ModelFormatError,
    NotSPDError,
    NumericError,
    ResourceLimitError,
    UnsupportedExtensionError,
)
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
    as_dataset,
    gram,
    nngp_mc_gram,
    ntk_exact_gram,
    ntk_probe_gram,
    output_dim,
    trajectory_gram,
)
from .laplace import (
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
from .linalg import EigenPairs, spd_solve, sym_eigh_topk
from .net import AdamState, FeedForwardNet, NetArch, adam_step, param_jacobian
from .nystrom import NystromModel, nystrom_extend, nystrom_fit, reconstruct_train
from .seeding import derive_rng, derive_seed
from .serialize import load_model, read_matrix_csv, save_model, write_matrix_csv
from .training import (
    EigenfunctionModel,
    TrainConfig,
    batch_quadratic_forms,
    evaluate,
    loss,
    reconstruct,
    surrogate_cotangents,
    train,
)

__version__ = "0.1.0"
