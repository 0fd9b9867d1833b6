"""Helmholtz machines trained by wake-sleep, with multi-resolution weight
initialization and an evaluation toolkit for the generative models they
learn."""

from .datasets import Dataset, load_cifar10, load_idx, rgb_to_gray, split_by_class, take
from .errors import (
    ArchitectureError,
    BudgetError,
    ConfigError,
    ConsistencyError,
    DataError,
    DimensionError,
    FormatError,
    HmError,
)
from .evaluate import (
    ProbeModel,
    adm,
    density_vector,
    entropy,
    improvement_factor,
    knn1_accuracy,
    knn1_classify,
    mean_min_distance,
    nearest_in_set,
    normalized_entropy,
    novelty,
    probe_feature_sets,
    probe_train,
    unrepresented_count,
)
from .machine import (
    Architecture,
    HelmholtzMachine,
    InitSpec,
    TrainConfig,
    count_free_parameters,
    init_machine,
    train,
)
from .numerics import bernoulli, derive_seed, euclidean, make_rng, sigmoid
from .oracle import (
    OracleBudget,
    free_energy,
    generative_posterior,
    generative_prob,
    kl_divergence,
    recognition_posterior,
    variational_free_energy,
)
from .pyramid import (
    StageConfig,
    binarize,
    build_pyramid,
    downsample,
    pyramid_pretrain,
    stage_visible_sides,
)
from .report import Report, emit_report, write_pgm

__version__ = "0.1.0"
