from .groups import build_localized_groups, consolidation_loss
from .replay import ReplaySelection, reconstruction_based_replay
from .sampling import (
    SyntheticWeekSet,
    forgetting_resilient_sampling,
    sample_counts,
    synchronize_samples,
)
from .engine import (
    EvalResult,
    PretrainReport,
    TaskTrainReport,
    TFMoEState,
    evaluate_task,
    initialize_state,
    pretrain_stage,
    train_task,
)

__all__ = [
    "build_localized_groups",
    "consolidation_loss",
    "ReplaySelection",
    "reconstruction_based_replay",
    "SyntheticWeekSet",
    "forgetting_resilient_sampling",
    "sample_counts",
    "synchronize_samples",
    "EvalResult",
    "PretrainReport",
    "TaskTrainReport",
    "TFMoEState",
    "evaluate_task",
    "initialize_state",
    "pretrain_stage",
    "train_task",
]
