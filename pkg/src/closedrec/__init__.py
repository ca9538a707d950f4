"""Closed-form collaborative filtering at desk scale.

Core pieces: compressed-row binary interaction matrices with symmetric
degree normalization, a randomized truncated SVD with an exact oracle,
two one-shot scorers (truncated-SVD pseudo-inverse regression and
zero-diagonal ridge regression over items), ranking metrics with
training-item masking, and sweep/robustness/timing harnesses.
"""

from .sparse import (
    InteractionMatrix,
    DegreeVectors,
    NormalizedMatrix,
    compute_degrees,
    normalize,
    sparse_times_dense,
    sparse_transpose_times_dense,
    frobenius_mse,
)
from .svd import (
    TruncatedFactorization,
    randomized_truncated_svd,
    exact_svd,
    pseudo_inverse_apply,
    reciprocal_sigma,
)
from .models import (
    SvdAeModel,
    EaseModel,
    SvdParams,
    select_rank,
    fit_svd_ae,
    predict_svd_ae,
    fit_ease,
    predict_ease,
)
from .evaluation import (
    TopKRanking,
    EvalReport,
    NoiseSpec,
    rank_top_k,
    hr_at_k,
    ndcg_at_k,
    psp_at_k,
    inject_noise,
    evaluate_rankings,
)
from .harness import (
    ModelSpec,
    SweepResult,
    Histogram,
    timed_fit,
    model_mse,
    evaluate_model,
    sweep_gamma,
    sweep_lambda_ease,
    sweep_noise,
    export_spectrum,
    reconstruction_stats,
)
from .data import (
    DatasetBundle,
    load_interactions,
    build_bundle,
    load_bundle,
    generate_synthetic,
    random_interaction_matrix,
)
from .store import (
    PersistenceError,
    save_model,
    load_model,
    write_report,
    read_report,
)

__version__ = "0.1.0"
