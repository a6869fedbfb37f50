"""Latent-trait models for predicting binary student exam responses.

Point-estimate ability/difficulty, interaction, and class interaction
models trained by SGD; variational counterparts trained by reparameterized
Monte Carlo ELBO ascent; synthetic data generation, evaluation metrics,
significance testing, embedding interpretability, and pool-based active
learning, all behind one CLI.
"""

from .data import (
    BinaryResponse,
    Dataset,
    ParseError,
    RawResponse,
    Split,
    binarize,
    build_dataset,
    load_binary_csv,
    load_raw_csv,
    split_train_test,
    subsample_students,
    write_binary_csv,
)
from .models import (
    CLASS_INTERACTION,
    INTERACTION,
    RASCH,
    ClassInteractionParams,
    InteractionParams,
    ModelSpec,
    RaschParams,
    logit_class_interaction,
    logit_interaction,
    logit_rasch,
    predict_label,
    predict_prob,
    predict_proba_array,
    sigmoid,
)
from .optim import TrainConfig, TrainReport, TrainingDiverged, finite_diff_check, grad_nll, nll, sgd_train
from .vi import (
    CLASS_INTERACTION_VI,
    INTERACTION_VI,
    MONTE_CARLO,
    PLUG_IN_MEAN,
    RASCH_VI,
    GaussianVariational,
    VIConfig,
    VIParams,
    elbo_finite_diff_check,
    elbo_grad,
    elbo_mc,
    kl_gaussian,
    predict_prob_vi,
    predict_proba_vi_array,
    reparameterize,
    train_vi,
)
from .metrics import (
    MetricsReport,
    SimilarityMatrix,
    ZTestResult,
    accuracy,
    cosine_similarity_matrix,
    log_loss,
    two_proportion_z_test,
)
from .synth import SynthConfig, SynthTruth, generate_synthetic
from .active import (
    ActiveConfig,
    ActiveResult,
    PoolState,
    PoolStudent,
    ability_bucket_report,
    make_pool_state,
    run_active_loop,
    select_next,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint

__version__ = "0.1.0"
