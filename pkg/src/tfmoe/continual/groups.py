"""Localized groups and the knowledge-consolidation objective."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, ops
from ..experts import VaeExpert, vae_elbo


def build_localized_groups(evidence: np.ndarray) -> list[list[int]]:
    """Assign each row (node) to the expert with the highest evidence.

    Ties go to the lowest expert index. Returns K lists of row indices;
    empty groups are legal (the failure mode where everything lands on one
    expert is diagnosable from the recorded group-size histogram).
    """
    evidence = np.asarray(evidence)
    k = evidence.shape[1]
    groups: list[list[int]] = [[] for _ in range(k)]
    if evidence.shape[0] == 0:
        return groups
    winners = np.argmax(evidence, axis=1)
    for i, w in enumerate(winners):
        groups[int(w)].append(i)
    return groups


def consolidation_loss(
    experts: list[VaeExpert],
    groups: list[list[int]],
    weeks: np.ndarray,
    rng: np.random.Generator,
) -> Tensor:
    """Summed per-group ELBO of the current reconstructors (differentiable).

    Groups come from *frozen previous-task* evidence; maximising this term
    while fitting the prediction loss is what preserves each expert's
    territory. Empty groups contribute zero.
    """
    total: Tensor | None = None
    for expert, group in zip(experts, groups):
        if not group:
            continue
        noise = rng.standard_normal((len(group), expert.d_z))
        term = vae_elbo(expert, weeks[group], noise)
        total = term if total is None else ops.add(total, term)
    if total is None:
        return Tensor(np.asarray(0.0))
    return total
