from ..config import ExperimentConfig, load_config_file
from .metrics import HorizonMetrics, MetricsReport, compute_metrics
from .checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint
from .protocol import RunResult, engine_config, node_subset_mae, resolve_tasks, run_protocol

__all__ = [
    "ExperimentConfig",
    "load_config_file",
    "HorizonMetrics",
    "MetricsReport",
    "compute_metrics",
    "FORMAT_VERSION",
    "load_checkpoint",
    "save_checkpoint",
    "RunResult",
    "engine_config",
    "node_subset_mae",
    "resolve_tasks",
    "run_protocol",
]
