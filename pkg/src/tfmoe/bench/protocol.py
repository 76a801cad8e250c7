"""Experiment protocols: full continual run plus the three reference modes.

All four protocols share one engine; they differ only in configuration:

    tfmoe       full mechanism set (beta, ns_frac, nr_frac as configured)
    expansible  beta = ns_frac = nr_frac = 0, trains on new nodes only
    static      trains task 1, then predicts every later task unchanged
    retrained   trains every task on all of its nodes (upper bound)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import ExperimentConfig
from ..continual import (
    EvalResult,
    PretrainReport,
    TaskTrainReport,
    TFMoEState,
    evaluate_task,
    initialize_state,
    pretrain_stage,
    train_task,
)
from ..data import TaskDataset, generate_stream, load_csv
from ..errors import ConfigError
from ..data.synthetic import StreamSpec
from .checkpoint import save_checkpoint
from .metrics import MetricsReport, compute_metrics


@dataclass
class RunResult:
    config: ExperimentConfig
    pretrain: PretrainReport
    reports: list[TaskTrainReport]
    evals: list[EvalResult]
    metrics: list[MetricsReport]
    aggregate_mae: float
    checkpoints: list[str] = field(default_factory=list)
    state: TFMoEState | None = None


def engine_config(config: ExperimentConfig) -> ExperimentConfig:
    """Fold the protocol into plain engine switches."""
    if config.protocol == "expansible":
        return config.replace(beta=0.0, ns_frac=0.0, nr_frac=0.0)
    return config


def resolve_tasks(config: ExperimentConfig) -> list[TaskDataset]:
    if (config.csv_path is None) == (config.stream_spec is None):
        raise ConfigError("exactly one of csv_path / stream_spec must be set")
    if config.csv_path is not None:
        return load_csv(config.csv_path, steps_per_day=config.steps_per_day,
                        calendar=config.calendar)
    return generate_stream(StreamSpec.from_dict(config.stream_spec))


def run_protocol(
    config: ExperimentConfig,
    tasks: list[TaskDataset] | None = None,
    out_dir=None,
    keep_state: bool = False,
) -> RunResult:
    """Pre-train, run the per-task loop, evaluate every task's test split."""
    if tasks is None:
        tasks = resolve_tasks(config)
    cfg = engine_config(config)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    state = initialize_state(cfg, steps_per_week=tasks[0].steps_per_week)
    pretrain = pretrain_stage(state, tasks[0])

    reports: list[TaskTrainReport] = []
    evals: list[EvalResult] = []
    metrics: list[MetricsReport] = []
    checkpoints: list[str] = []
    for task in tasks:
        if cfg.protocol == "static" and task.task_index > 1:
            pass  # the task-1 model predicts unchanged
        else:
            report = train_task(state, task)
            reports.append(report)
            if out_dir is not None:
                log_path = out_dir / f"task_{task.task_index:03d}_epochs.jsonl"
                log_path.write_text(report.to_jsonl() + "\n")
        result = evaluate_task(state, task)
        evals.append(result)
        metrics.append(compute_metrics(result.predictions, result.truth,
                                       cfg.horizon_steps, mape_mask=cfg.mape_mask))
        if out_dir is not None:
            ckpt = out_dir / f"task_{task.task_index:03d}.ckpt"
            save_checkpoint(state, ckpt)
            checkpoints.append(str(ckpt))
            with (out_dir / f"task_{task.task_index:03d}_metrics.json").open("w") as fh:
                json.dump(metrics[-1].to_dict(), fh, indent=2)

    aggregate_mae = float(np.mean([m.aggregate.mae for m in metrics]))
    if out_dir is not None:
        summary = {
            "protocol": config.protocol,
            "seed": config.seed,
            "aggregate_mae": aggregate_mae,
            "per_task_mae": [m.aggregate.mae for m in metrics],
        }
        with (out_dir / "summary.json").open("w") as fh:
            json.dump(summary, fh, indent=2)
    return RunResult(
        config=config,
        pretrain=pretrain,
        reports=reports,
        evals=evals,
        metrics=metrics,
        aggregate_mae=aggregate_mae,
        checkpoints=checkpoints,
        state=state if keep_state else None,
    )


def node_subset_mae(result: EvalResult, nodes) -> float:
    """MAE over a node subset of one evaluation (e.g. first-task nodes)."""
    idx = [result.nodes.index(n) for n in nodes]
    err = result.predictions[:, idx, :] - result.truth[:, idx, :]
    return float(np.abs(err).mean())
