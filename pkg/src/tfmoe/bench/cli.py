"""Command-line experiment runner.

Subcommands: generate, pretrain, train, evaluate, report, gradcheck.
Flags mirror the experiment config; ``--config`` supplies a JSON file and
explicit flags override it. TFMOE_DATA_DIR provides the default data
directory. Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric
divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from ..config import ExperimentConfig, load_config_file
from ..continual import evaluate_task, train_task
from ..data import (
    generate_stream,
    load_stream_spec,
    save_stream_spec,
    write_cluster_labels,
    write_flow_csv,
    write_task_metadata,
)
from ..errors import ConfigError, DataError, NumericError, TfmoeError
from .checkpoint import load_checkpoint, save_checkpoint
from .metrics import compute_metrics
from .protocol import resolve_tasks, run_protocol

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

CONFIG_FLAGS = {
    "k": int, "alpha": float, "beta": float, "ns_frac": float, "nr_frac": float,
    "batch_size": int, "epochs_first": int, "epochs_later": int, "seed": int,
    "protocol": str, "csv_path": str, "steps_per_day": int, "calendar": int,
    "d_z": int, "d_z_pretrain": int, "d_embed": int, "channels": int,
    "m_steps": int, "lr_pretrain": float, "lr_recon": float, "lr_pred": float,
    "pretrain_ae_epochs": int, "dec_epochs": int, "recon_epochs": int,
    "t_in": int, "t_out": int, "mape_mask": float,
}


def data_dir_default() -> Path:
    return Path(os.environ.get("TFMOE_DATA_DIR", "."))


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flags override it)")
    for name, typ in CONFIG_FLAGS.items():
        parser.add_argument(f"--{name.replace('_', '-')}", type=typ, dest=name)
    parser.add_argument("--stream-spec", dest="stream_spec_path",
                        help="JSON stream spec to use as the data source")
    parser.add_argument("--horizon-steps", dest="horizon_steps",
                        help="comma-separated horizon steps, e.g. 3,6,12")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config_file(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for name in CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "stream_spec_path", None):
        overrides["stream_spec"] = load_stream_spec(args.stream_spec_path).to_dict()
        overrides["csv_path"] = None
    if getattr(args, "horizon_steps", None):
        overrides["horizon_steps"] = [int(x) for x in args.horizon_steps.split(",")]
    if overrides.get("csv_path"):
        path = Path(overrides["csv_path"])
        if not path.is_absolute() and not path.exists():
            overrides["csv_path"] = str(data_dir_default() / path)
    return config.replace(**overrides) if overrides else config


def cmd_generate(args) -> int:
    spec = load_stream_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    tasks = generate_stream(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_flow_csv(tasks, out / "flow.csv")
    write_task_metadata(tasks, out / "meta.csv")
    write_cluster_labels(tasks, out / "labels.csv")
    save_stream_spec(spec, out / "stream_spec.json")
    print(f"wrote {len(tasks)} tasks to {out} "
          f"({tasks[-1].n_nodes} nodes in the final task)")
    return 0


def _run_dir(args) -> Path:
    run_dir = Path(args.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def cmd_pretrain(args) -> int:
    from ..continual import initialize_state, pretrain_stage

    config = build_config(args)
    tasks = resolve_tasks(config)
    run_dir = _run_dir(args)
    from .protocol import engine_config

    state = initialize_state(engine_config(config), tasks[0].steps_per_week)
    report = pretrain_stage(state, tasks[0])
    save_checkpoint(state, run_dir / "pretrain.ckpt")
    (run_dir / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    print(f"pretraining done; cluster sizes {report.group_sizes}; "
          f"checkpoint at {run_dir / 'pretrain.ckpt'}")
    return 0


def cmd_train(args) -> int:
    config = build_config(args)
    run_dir = _run_dir(args)
    if args.all_tasks:
        result = run_protocol(config, out_dir=run_dir)
        for task_metrics, report in zip(result.metrics, result.reports):
            print(f"task {report.task_index}: pool {report.pool_size} "
                  f"(new {report.delta_n}, synth {report.n_s}, replay {report.n_r}), "
                  f"aggregate MAE {task_metrics.aggregate.mae:.4f}")
        print(f"mean MAE across tasks: {result.aggregate_mae:.4f}")
        return 0
    if args.task is None:
        raise ConfigError("train needs --task N or --all-tasks")
    tasks = resolve_tasks(config)
    if not 1 <= args.task <= len(tasks):
        raise ConfigError(f"--task must be in 1..{len(tasks)}")
    prev = run_dir / ("pretrain.ckpt" if args.task == 1 else f"task_{args.task - 1:03d}.ckpt")
    if not prev.exists():
        raise DataError(f"missing checkpoint {prev}; run pretrain / earlier tasks first")
    state = load_checkpoint(prev)
    task = tasks[args.task - 1]
    report = train_task(state, task)
    ckpt = run_dir / f"task_{args.task:03d}.ckpt"
    save_checkpoint(state, ckpt)
    (run_dir / f"task_{args.task:03d}_epochs.jsonl").write_text(report.to_jsonl() + "\n")
    result = evaluate_task(state, task)
    metrics = compute_metrics(result.predictions, result.truth, state.config.horizon_steps,
                              mape_mask=state.config.mape_mask)
    with (run_dir / f"task_{args.task:03d}_metrics.json").open("w") as fh:
        json.dump(metrics.to_dict(), fh, indent=2)
    print(f"task {args.task}: pool {report.pool_size}, MAE {metrics.aggregate.mae:.4f}, "
          f"checkpoint at {ckpt}")
    return 0


def cmd_evaluate(args) -> int:
    config = build_config(args)
    run_dir = Path(args.run_dir)
    ckpt = Path(args.checkpoint) if args.checkpoint else run_dir / f"task_{args.task:03d}.ckpt"
    if not ckpt.exists():
        raise DataError(f"checkpoint not found: {ckpt}")
    state = load_checkpoint(ckpt)
    tasks = resolve_tasks(config)
    if not 1 <= args.task <= len(tasks):
        raise ConfigError(f"--task must be in 1..{len(tasks)}")
    result = evaluate_task(state, tasks[args.task - 1])
    metrics = compute_metrics(result.predictions, result.truth,
                              state.config.horizon_steps, mape_mask=state.config.mape_mask)
    print(json.dumps(metrics.to_dict(), indent=2))
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    metric_files = sorted(run_dir.glob("task_*_metrics.json"))
    if not metric_files:
        raise DataError(f"no task metrics found under {run_dir}")
    rows = []
    for path in metric_files:
        task_index = int(path.name.split("_")[1])
        payload = json.loads(path.read_text())
        for horizon, m in payload["per_horizon"].items():
            rows.append({"task": task_index, "horizon": int(horizon), **m})
        rows.append({"task": task_index, "horizon": "mean", **payload["aggregate"]})
    out_csv = run_dir / "report.csv"
    with out_csv.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["task", "horizon", "mae", "rmse", "mape"])
        writer.writeheader()
        writer.writerows(rows)
    # per-task series of horizon-mean MAE, one line per task (plot data)
    plot_csv = run_dir / "per_task_mae.csv"
    with plot_csv.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task", "mae"])
        for row in rows:
            if row["horizon"] == "mean":
                writer.writerow([row["task"], row["mae"]])
    print(f"| task | horizon | MAE | RMSE | MAPE |")
    print(f"|------|---------|-----|------|------|")
    for row in rows:
        print(f"| {row['task']} | {row['horizon']} | {row['mae']:.4f} "
              f"| {row['rmse']:.4f} | {row['mape']:.4f} |")
    print(f"\nwrote {out_csv} and {plot_csv}")
    return 0


def cmd_gradcheck(args) -> int:
    from .gradsuite import run_kernel_suite

    results = run_kernel_suite(h=args.h, tol=args.tol)
    failed = 0
    for name, report in results:
        print(f"{name:32s} {report}")
        failed += 0 if report.passed else 1
    if failed:
        print(f"{failed} gradient checks FAILED")
        return EXIT_NUMERIC
    print(f"all {len(results)} gradient checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tfmoe",
                                     description="Continual mixture-of-experts "
                                                 "traffic forecasting experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesise an evolving-network dataset")
    p.add_argument("--spec", required=True, help="stream spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("pretrain", help="run the pre-training stage")
    add_config_flags(p)
    p.add_argument("--run-dir", required=True)
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("train", help="train one task or the whole stream")
    add_config_flags(p)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--task", type=int)
    p.add_argument("--all-tasks", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a task")
    add_config_flags(p)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--task", type=int, required=True)
    p.add_argument("--checkpoint")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate metrics into CSV/markdown")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("gradcheck", help="run the gradient-oracle suite")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--h", type=float, default=1e-5)
    p.set_defaults(fn=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TfmoeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
