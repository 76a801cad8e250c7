"""Evolving-network data model: tasks, normalization, weeks and windows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ProtocolError
from ..seeding import rng_for

DEFAULT_T_IN = 12
DEFAULT_T_OUT = 12
STD_FLOOR = 1e-12


@dataclass
class SensorSeries:
    """One sensor's flow series on a regular clock."""

    node_id: int
    flow: np.ndarray
    bin_minutes: int = 5

    def __post_init__(self):
        self.flow = np.asarray(self.flow, dtype=np.float64)
        if self.flow.ndim != 1:
            raise ProtocolError(f"node {self.node_id}: flow must be 1-D")
        if self.flow.size and self.flow.min() < 0.0:
            raise ProtocolError(f"node {self.node_id}: raw flows must be non-negative")


@dataclass
class NormStats:
    """Z-score parameters; std is floored to keep the inverse defined."""

    mean: float
    std: float

    def __post_init__(self):
        self.std = max(float(self.std), STD_FLOOR)
        self.mean = float(self.mean)

    def normalize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def denormalize(self, x):
        return np.asarray(x, dtype=np.float64) * self.std + self.mean


@dataclass
class TaskDataset:
    """One task of an evolving network: fixed node set, aligned raw series.

    ``calendar`` is the weekday of bin 0 (Monday = 0). ``cluster_labels``
    carries planted ground truth for synthetic streams, used only by tests.
    """

    task_index: int
    nodes: list[int]
    new_nodes: list[int]
    series: dict[int, SensorSeries]
    steps_per_day: int
    calendar: int = 0
    norm: NormStats | None = None
    cluster_labels: dict[int, int] | None = None

    def __post_init__(self):
        self.validate()

    # -- structure ------------------------------------------------------
    def validate(self):
        if self.task_index < 1:
            raise ProtocolError("task_index must be >= 1")
        if not set(self.new_nodes) <= set(self.nodes):
            raise ProtocolError("new_nodes must be a subset of nodes")
        if set(self.series) != set(self.nodes):
            raise ProtocolError("series keys must match the node list")
        lengths = {s.flow.shape[0] for s in self.series.values()}
        if len(lengths) > 1:
            raise ProtocolError(f"task {self.task_index}: unequal series lengths {lengths}")
        n_bins = lengths.pop() if lengths else 0
        if n_bins % self.steps_per_day != 0:
            raise ProtocolError(
                f"task {self.task_index}: {n_bins} bins not divisible by "
                f"steps_per_day={self.steps_per_day}"
            )
        if not 0 <= self.calendar <= 6:
            raise ProtocolError("calendar must be a weekday index 0..6")

    @property
    def n_bins(self) -> int:
        return next(iter(self.series.values())).flow.shape[0]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def steps_per_week(self) -> int:
        return 7 * self.steps_per_day

    def flow_block(self, node_ids, lo: int, hi: int) -> np.ndarray:
        """Raw flows for the given nodes over bin range [lo, hi)."""
        return np.stack([self.series[n].flow[lo:hi] for n in node_ids])

    def first_monday(self) -> int:
        return ((7 - self.calendar) % 7) * self.steps_per_day


def validate_stream(tasks: list[TaskDataset]) -> None:
    """Check the continually-expanding contract across consecutive tasks."""
    for prev, cur in zip(tasks, tasks[1:]):
        if not set(prev.nodes) <= set(cur.nodes):
            missing = sorted(set(prev.nodes) - set(cur.nodes))
            raise ProtocolError(
                f"task {cur.task_index} dropped nodes {missing[:5]}; node sets "
                "must be monotone non-decreasing"
            )
        expected_new = sorted(set(cur.nodes) - set(prev.nodes))
        if sorted(cur.new_nodes) != expected_new:
            raise ProtocolError(
                f"task {cur.task_index}: new_nodes disagree with the node-set difference"
            )


@dataclass(frozen=True)
class SplitRanges:
    train: tuple[int, int]
    val: tuple[int, int]
    test: tuple[int, int]


def split_protocol(
    dataset: TaskDataset,
    t_in: int = DEFAULT_T_IN,
    t_out: int = DEFAULT_T_OUT,
) -> SplitRanges:
    """Contiguous 6:2:2 time split, boundaries rounded down.

    The train portion must hold at least one full week plus one window, or
    the task cannot be processed at all.
    """
    n = dataset.n_bins
    b1 = int(np.floor(0.6 * n))
    b2 = int(np.floor(0.8 * n))
    if b1 < dataset.steps_per_week + t_in + t_out:
        raise ProtocolError(
            f"task {dataset.task_index}: train split of {b1} bins is shorter than "
            f"a week plus one window ({dataset.steps_per_week + t_in + t_out})"
        )
    return SplitRanges(train=(0, b1), val=(b1, b2), test=(b2, n))


def fit_normalizer(dataset: TaskDataset, train_range: tuple[int, int], node_subset) -> NormStats:
    """Population mean/std over the subset's raw flows in the train range."""
    node_subset = list(node_subset)
    if not node_subset or train_range[1] <= train_range[0]:
        raise ConfigError("fit_normalizer needs a non-empty node subset and range")
    block = dataset.flow_block(node_subset, *train_range)
    return NormStats(mean=float(block.mean()), std=float(block.std()))


@dataclass
class WeekMatrix:
    """Per-node normalized Monday-to-Sunday profile from the train range."""

    nodes: list[int]
    values: np.ndarray  # [n_nodes, steps_per_week]
    monday_offset: int

    def row(self, node_id: int) -> np.ndarray:
        return self.values[self.nodes.index(node_id)]


def extract_week(
    dataset: TaskDataset,
    train_range: tuple[int, int],
    norm: NormStats,
    nodes=None,
    reader=None,
) -> WeekMatrix:
    """First full Monday-start week of each node, z-scored with ``norm``.

    ``reader`` may replace ``dataset.flow_block`` (the continual engine
    routes reads through its access audit this way).
    """
    nodes = list(dataset.nodes if nodes is None else nodes)
    week = dataset.steps_per_week
    monday = dataset.first_monday()
    if monday < train_range[0]:
        monday += week * int(np.ceil((train_range[0] - monday) / week))
    if monday + week > train_range[1]:
        raise ProtocolError(
            f"task {dataset.task_index}: no full Monday-to-Sunday week inside "
            f"train range {train_range}"
        )
    reader = dataset.flow_block if reader is None else reader
    block = reader(nodes, monday, monday + week)
    return WeekMatrix(nodes=nodes, values=norm.normalize(block), monday_offset=monday)


@dataclass
class WindowBatch:
    """A batch of forecasting windows across a fixed node set.

    ``week_offsets`` give, per sample, the position of the window anchor
    (last input bin) within the Monday-aligned week cycle.
    """

    x: np.ndarray  # [batch, nodes, t_in]
    y: np.ndarray  # [batch, nodes, t_out]
    week_offsets: np.ndarray  # [batch]


def window_count(range_len: int, t_in: int = DEFAULT_T_IN, t_out: int = DEFAULT_T_OUT) -> int:
    return max(range_len - (t_in + t_out) + 1, 0)


def make_windows(
    dataset: TaskDataset,
    bin_range: tuple[int, int],
    norm: NormStats,
    nodes=None,
    t_in: int = DEFAULT_T_IN,
    t_out: int = DEFAULT_T_OUT,
    batch_size: int = 128,
    shuffle_seed: int | None = None,
    flow: np.ndarray | None = None,
) -> list[WindowBatch]:
    """All (x, y) window pairs in a bin range, z-scored and batched.

    ``flow`` may supply a pre-fetched raw block for the same nodes/range
    (the continual engine passes audited blocks through here); otherwise the
    block is read from the dataset.
    """
    nodes = list(dataset.nodes if nodes is None else nodes)
    lo, hi = bin_range
    if flow is None:
        flow = dataset.flow_block(nodes, lo, hi)
    values = norm.normalize(flow)
    n_windows = window_count(hi - lo, t_in, t_out)
    if n_windows <= 0:
        return []
    starts = np.arange(n_windows)
    if shuffle_seed is not None:
        rng_for(shuffle_seed, "windows").shuffle(starts)
    week = dataset.steps_per_week
    monday = dataset.first_monday()
    batches = []
    for chunk in np.array_split(starts, max(1, int(np.ceil(n_windows / batch_size)))):
        if chunk.size == 0:
            continue
        x = np.stack([values[:, s : s + t_in] for s in chunk])
        y = np.stack([values[:, s + t_in : s + t_in + t_out] for s in chunk])
        anchors = lo + chunk + t_in - 1
        offsets = (anchors - monday) % week
        batches.append(WindowBatch(x=x, y=y, week_offsets=offsets))
    return batches
