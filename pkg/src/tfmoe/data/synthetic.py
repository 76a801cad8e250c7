"""Synthetic evolving-network generator with planted pattern clusters.

Each cluster owns a smooth daily/weekly template; a node is a jittered,
noisy copy of its cluster template. New tasks extend the node set (drawing
clusters from the same pool) and may drift the templates, which is what
makes forgetting measurable at desk scale. Ground-truth labels are kept on
the datasets for test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from ..errors import ConfigError
from ..seeding import rng_for
from .series import SensorSeries, TaskDataset, validate_stream


@dataclass
class StreamSpec:
    n_tasks: int = 3
    initial_nodes: int = 30
    added_per_task: int | list[int] = 10
    n_clusters: int = 3
    steps_per_day: int = 24
    days_per_task: int = 14
    harmonics: int = 2
    base_level: float = 60.0
    amplitude: float = 40.0
    noise: float = 0.05  # flow-noise std as a fraction of `amplitude`
    jitter: float = 0.02  # per-node multiplicative spread
    drift: float = 0.0  # per-task template perturbation scale
    calendar: int = 0
    seed: int = 0
    # optional per-task cluster draw weights for newly added nodes;
    # outer length n_tasks, each inner length n_clusters
    cluster_weights: list[list[float]] | None = None

    def __post_init__(self):
        if min(self.n_tasks, self.initial_nodes, self.n_clusters, self.steps_per_day,
               self.days_per_task, self.harmonics) <= 0:
            raise ConfigError("stream spec counts must be positive")
        if self.noise < 0 or self.jitter < 0 or self.drift < 0:
            raise ConfigError("noise, jitter and drift must be non-negative")
        if isinstance(self.added_per_task, list) and len(self.added_per_task) != self.n_tasks - 1:
            raise ConfigError("added_per_task list must have n_tasks - 1 entries")
        if self.cluster_weights is not None:
            if len(self.cluster_weights) != self.n_tasks:
                raise ConfigError("cluster_weights must have one row per task")
            for row in self.cluster_weights:
                if len(row) != self.n_clusters:
                    raise ConfigError("each cluster_weights row needs n_clusters entries")

    def additions(self) -> list[int]:
        if isinstance(self.added_per_task, list):
            return list(self.added_per_task)
        return [self.added_per_task] * (self.n_tasks - 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StreamSpec":
        return cls(**d)


@dataclass
class _ClusterPattern:
    base: float
    amps: np.ndarray
    phases: np.ndarray
    weekend_factor: float


def _draw_patterns(spec: StreamSpec, rng: np.random.Generator) -> list[_ClusterPattern]:
    patterns = []
    for c in range(spec.n_clusters):
        # deterministic separation between clusters, random detail within
        phase0 = 2.0 * np.pi * c / spec.n_clusters
        amps = spec.amplitude * rng.uniform(0.6, 1.0, size=spec.harmonics)
        amps /= np.arange(1, spec.harmonics + 1)
        phases = phase0 + rng.uniform(-0.3, 0.3, size=spec.harmonics)
        weekend = 0.3 + 0.6 * (c / max(spec.n_clusters - 1, 1))
        base = spec.base_level * (0.8 + 0.4 * rng.random())
        patterns.append(_ClusterPattern(base, amps, phases, weekend))
    return patterns


def _week_template(spec: StreamSpec, pat: _ClusterPattern) -> np.ndarray:
    spw = 7 * spec.steps_per_day
    tow = np.arange(spw)
    tod = (tow % spec.steps_per_day) / spec.steps_per_day
    dow = tow // spec.steps_per_day
    wave = np.zeros(spw)
    for h, (a, ph) in enumerate(zip(pat.amps, pat.phases), start=1):
        wave += a * np.sin(2.0 * np.pi * h * tod + ph)
    scale = np.where(dow >= 5, pat.weekend_factor, 1.0)
    return pat.base + scale * wave


def _drift_patterns(patterns, spec: StreamSpec, rng: np.random.Generator):
    out = []
    for pat in patterns:
        out.append(
            _ClusterPattern(
                base=pat.base * (1.0 + 0.5 * spec.drift * rng.normal()),
                amps=pat.amps * (1.0 + spec.drift * rng.normal(size=pat.amps.shape)),
                phases=pat.phases + spec.drift * rng.normal(size=pat.phases.shape),
                weekend_factor=pat.weekend_factor,
            )
        )
    return out


def generate_stream(spec: StreamSpec) -> list[TaskDataset]:
    """Deterministically generate one task per spec, labels included."""
    rng = rng_for(spec.seed, "stream")
    patterns = _draw_patterns(spec, rng)
    n_bins = spec.days_per_task * spec.steps_per_day
    spw = 7 * spec.steps_per_day

    labels: dict[int, int] = {}
    jitters: dict[int, float] = {}
    next_node = 0
    tasks: list[TaskDataset] = []
    nodes: list[int] = []

    for task_index in range(1, spec.n_tasks + 1):
        if task_index == 1:
            n_new = spec.initial_nodes
        else:
            n_new = spec.additions()[task_index - 2]
            patterns = _drift_patterns(patterns, spec, rng)
        weights = None
        if spec.cluster_weights is not None:
            row = np.asarray(spec.cluster_weights[task_index - 1], dtype=np.float64)
            weights = row / row.sum()
        new_ids = list(range(next_node, next_node + n_new))
        next_node += n_new
        for node in new_ids:
            labels[node] = int(rng.choice(spec.n_clusters, p=weights))
            jitters[node] = 1.0 + spec.jitter * rng.normal()
        nodes = nodes + new_ids

        templates = [_week_template(spec, pat) for pat in patterns]
        tow = (spec.calendar * spec.steps_per_day + np.arange(n_bins)) % spw
        series = {}
        for node in nodes:
            clean = templates[labels[node]][tow] * jitters[node]
            noisy = clean + spec.noise * spec.amplitude * rng.normal(size=n_bins)
            series[node] = SensorSeries(node_id=node, flow=np.maximum(noisy, 0.0),
                                        bin_minutes=24 * 60 // spec.steps_per_day)
        tasks.append(
            TaskDataset(
                task_index=task_index,
                nodes=list(nodes),
                new_nodes=new_ids if task_index > 1 else list(nodes),
                series=series,
                steps_per_day=spec.steps_per_day,
                calendar=spec.calendar,
                cluster_labels={n: labels[n] for n in nodes},
            )
        )
    validate_stream(tasks)
    return tasks
