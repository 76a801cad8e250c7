from .series import (
    DEFAULT_T_IN,
    DEFAULT_T_OUT,
    NormStats,
    SensorSeries,
    SplitRanges,
    TaskDataset,
    WeekMatrix,
    WindowBatch,
    extract_week,
    fit_normalizer,
    make_windows,
    split_protocol,
    validate_stream,
    window_count,
)
from .synthetic import StreamSpec, generate_stream
from .io import (
    load_csv,
    load_stream_spec,
    load_task_metadata,
    metadata_node_counts,
    save_stream_spec,
    write_cluster_labels,
    write_flow_csv,
    write_task_metadata,
)
from .audit import AccessAudit, AuditReport

__all__ = [
    "DEFAULT_T_IN",
    "DEFAULT_T_OUT",
    "NormStats",
    "SensorSeries",
    "SplitRanges",
    "TaskDataset",
    "WeekMatrix",
    "WindowBatch",
    "extract_week",
    "fit_normalizer",
    "make_windows",
    "split_protocol",
    "validate_stream",
    "window_count",
    "StreamSpec",
    "generate_stream",
    "load_csv",
    "load_stream_spec",
    "load_task_metadata",
    "metadata_node_counts",
    "save_stream_spec",
    "write_cluster_labels",
    "write_flow_csv",
    "write_task_metadata",
    "AccessAudit",
    "AuditReport",
]
