"""Reconstruction-based replay: pick the least-explained pre-existing nodes."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class ReplaySelection:
    """Replayed node ids with their summed evidence, worst first."""

    node_ids: list[int]
    scores: list[float]


def reconstruction_based_replay(
    evidence: np.ndarray,
    node_ids,
    n_r: int,
) -> ReplaySelection:
    """Sort nodes ascending by total evidence across experts, keep ``n_r``.

    ``evidence`` rows align with ``node_ids`` (pre-existing nodes scored on
    their current-task weeks with frozen previous-task reconstructors).
    Ties break toward the smaller node id. ``n_r`` larger than the node
    count clamps with a warning.
    """
    node_ids = list(node_ids)
    totals = np.asarray(evidence).sum(axis=1)
    if len(node_ids) != totals.shape[0]:
        raise ValueError("evidence rows must align with node_ids")
    if n_r > len(node_ids):
        logger.warning("replay request n_r=%d exceeds %d pre-existing nodes; clamping",
                       n_r, len(node_ids))
        n_r = len(node_ids)
    order = sorted(range(len(node_ids)), key=lambda i: (totals[i], node_ids[i]))
    picked = order[: max(n_r, 0)]
    return ReplaySelection(
        node_ids=[node_ids[i] for i in picked],
        scores=[float(totals[i]) for i in picked],
    )
