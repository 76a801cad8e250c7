"""Forgetting-resilient sampling: rehearsal weeks from frozen decoders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..experts import VaeExpert, sample_prior


@dataclass
class SyntheticWeekSet:
    """Generated week profiles tagged by their originating expert."""

    weeks: np.ndarray  # [n_s, steps_per_week]
    expert_ids: np.ndarray  # [n_s]

    @property
    def count(self) -> int:
        return self.weeks.shape[0]


def sample_counts(n_s: int, k: int) -> list[int]:
    """floor(n_s/k) each, remainder to the lowest-index experts."""
    base, rem = divmod(int(n_s), k)
    return [base + (1 if i < rem else 0) for i in range(k)]


def forgetting_resilient_sampling(
    experts: list[VaeExpert],
    n_s: int,
    rng: np.random.Generator,
) -> SyntheticWeekSet:
    """Draw ``n_s`` week profiles from the experts' priors/decoders.

    Call this with the previous task's (frozen) parameters, before any
    current-task gradient step.
    """
    counts = sample_counts(n_s, len(experts))
    chunks = []
    tags = []
    for expert, count in zip(experts, counts):
        chunks.append(sample_prior(expert, count, rng))
        tags.extend([expert.index] * count)
    width = experts[0].width
    weeks = np.concatenate(chunks) if chunks else np.empty((0, width))
    return SyntheticWeekSet(weeks=weeks, expert_ids=np.asarray(tags, dtype=np.int64))


def synchronize_samples(
    weeks: np.ndarray,
    week_offsets: np.ndarray,
    t_in: int,
    t_out: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Slice synthetic weeks at the batch's time-of-week anchors.

    For an anchor offset t the inputs cover week bins [t - t_in + 1, t] and
    the targets [t + 1, t + t_out], indices wrapped modulo the week length,
    so synthetic rows stay aligned with the real windows they join.
    Returns x [batch, n_synth, t_in] and y [batch, n_synth, t_out].
    """
    weeks = np.asarray(weeks, dtype=np.float64)
    week_offsets = np.asarray(week_offsets, dtype=np.int64)
    if weeks.size == 0:
        b = week_offsets.shape[0]
        return np.empty((b, 0, t_in)), np.empty((b, 0, t_out))
    spw = weeks.shape[1]
    x_idx = (week_offsets[:, None] - (t_in - 1) + np.arange(t_in)[None, :]) % spw
    y_idx = (week_offsets[:, None] + 1 + np.arange(t_out)[None, :]) % spw
    x = weeks[:, x_idx].transpose(1, 0, 2)
    y = weeks[:, y_idx].transpose(1, 0, 2)
    return x, y
