"""File interfaces.

Flow CSV:      header ``task,node_id,bin_index,flow``; rows sorted by
               (task, node_id, bin_index); bin_index is 0-based per task.
Metadata CSV:  header ``task,node_id,is_new`` with is_new in {0,1}.
Stream spec:   JSON object whose keys mirror StreamSpec fields.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..errors import DataError, GapError, ProtocolError
from .series import SensorSeries, TaskDataset, validate_stream
from .synthetic import StreamSpec

FLOW_HEADER = ["task", "node_id", "bin_index", "flow"]
META_HEADER = ["task", "node_id", "is_new"]


def load_csv(
    path,
    steps_per_day: int,
    calendar: int = 0,
    bin_minutes: int = 5,
) -> list[TaskDataset]:
    """Read a flow CSV into one TaskDataset per task.

    Every (task, node) series must cover bins 0..L-1 without gaps, all
    series of a task must share L, and node sets must be monotone
    non-decreasing across tasks.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"flow file not found: {path}")
    per_task: dict[int, dict[int, list[tuple[int, float]]]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FLOW_HEADER:
            raise DataError(f"bad flow CSV header: {header}")
        for row in reader:
            task, node, bin_idx = int(row[0]), int(row[1]), int(row[2])
            per_task.setdefault(task, {}).setdefault(node, []).append((bin_idx, float(row[3])))

    tasks = []
    prev_nodes: set[int] = set()
    for task_index in sorted(per_task):
        node_map = per_task[task_index]
        series = {}
        lengths = set()
        for node, pairs in node_map.items():
            pairs.sort()
            bins = [b for b, _ in pairs]
            expected = list(range(len(bins)))
            if bins != expected:
                missing = sorted(set(expected) - set(bins))
                where = missing[0] if missing else bins[len(expected) - 1]
                raise GapError(
                    f"task {task_index}, node {node}: missing bin {where}"
                )
            series[node] = SensorSeries(
                node_id=node,
                flow=np.array([v for _, v in pairs]),
                bin_minutes=bin_minutes,
            )
            lengths.add(len(pairs))
        if len(lengths) > 1:
            raise ProtocolError(f"task {task_index}: unequal series lengths {lengths}")
        nodes = sorted(node_map)
        if not prev_nodes <= set(nodes):
            dropped = sorted(prev_nodes - set(nodes))
            raise ProtocolError(
                f"task {task_index} dropped nodes {dropped[:5]}; networks may only expand"
            )
        new = sorted(set(nodes) - prev_nodes)
        tasks.append(
            TaskDataset(
                task_index=task_index,
                nodes=nodes,
                new_nodes=new if prev_nodes else nodes,
                series=series,
                steps_per_day=steps_per_day,
                calendar=calendar,
            )
        )
        prev_nodes = set(nodes)
    validate_stream(tasks)
    return tasks


def write_flow_csv(tasks: list[TaskDataset], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FLOW_HEADER)
        for task in tasks:
            for node in sorted(task.nodes):
                flow = task.series[node].flow
                for b in range(flow.shape[0]):
                    writer.writerow([task.task_index, node, b, repr(float(flow[b]))])


def load_task_metadata(path) -> dict[int, dict[int, bool]]:
    """Metadata CSV -> {task: {node_id: is_new}}."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"metadata file not found: {path}")
    out: dict[int, dict[int, bool]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != META_HEADER:
            raise DataError(f"bad metadata CSV header: {header}")
        for row in reader:
            out.setdefault(int(row[0]), {})[int(row[1])] = row[2].strip() == "1"
    return out


def metadata_node_counts(meta: dict[int, dict[int, bool]]) -> dict[int, int]:
    return {task: len(nodes) for task, nodes in sorted(meta.items())}


def write_task_metadata(tasks: list[TaskDataset], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(META_HEADER)
        for task in tasks:
            new = set(task.new_nodes)
            for node in sorted(task.nodes):
                writer.writerow([task.task_index, node, 1 if node in new else 0])


def write_cluster_labels(tasks: list[TaskDataset], path) -> None:
    """Planted labels for synthetic streams (oracle metadata, optional)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task", "node_id", "cluster"])
        for task in tasks:
            if task.cluster_labels is None:
                continue
            for node in sorted(task.nodes):
                writer.writerow([task.task_index, node, task.cluster_labels[node]])


def load_stream_spec(path) -> StreamSpec:
    path = Path(path)
    if not path.exists():
        raise DataError(f"stream spec not found: {path}")
    with path.open() as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"stream spec is not valid JSON: {exc}") from exc
    try:
        return StreamSpec.from_dict(payload)
    except TypeError as exc:
        raise DataError(f"stream spec has unknown keys: {exc}") from exc


def save_stream_spec(spec: StreamSpec, path) -> None:
    with Path(path).open("w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
        fh.write("\n")
