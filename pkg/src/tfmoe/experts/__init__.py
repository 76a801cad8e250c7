from .reconstructor import (
    PRIOR_LOG_VAR_CLAMP,
    VaeExpert,
    elbo_rows,
    evidence_matrix,
    sample_prior,
    train_group_reconstructors,
    vae_elbo,
)
from .predictor import (
    LearnedAdjacency,
    PredictorExpert,
    adjacency_over_nodes,
    gating_weights,
    gumbel_noise,
    learn_adjacency,
    moe_predict,
    prediction_loss,
    predictor_forward,
    taped_gating,
)

__all__ = [
    "PRIOR_LOG_VAR_CLAMP",
    "VaeExpert",
    "elbo_rows",
    "evidence_matrix",
    "sample_prior",
    "train_group_reconstructors",
    "vae_elbo",
    "LearnedAdjacency",
    "PredictorExpert",
    "adjacency_over_nodes",
    "gating_weights",
    "gumbel_noise",
    "learn_adjacency",
    "moe_predict",
    "prediction_loss",
    "predictor_forward",
    "taped_gating",
]
