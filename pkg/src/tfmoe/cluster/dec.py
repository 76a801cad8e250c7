"""Deep embedded clustering refinement and hard group assignment."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Adam, Tensor, no_grad
from ..autodiff import ops
from ..errors import NumericError
from .autoencoder import PretrainAutoencoder, reconstruction_loss

logger = logging.getLogger(__name__)


@dataclass
class ClusterState:
    """Outcome of the pre-training clustering stage."""

    centroids: np.ndarray  # [K, d_z]
    soft_assignments: np.ndarray  # q, [N, K]
    target: np.ndarray  # p, [N, K]
    hard_groups: list[list[int]]  # SG, K lists partitioning 0..N-1
    alpha: float
    losses: list[float] = field(default_factory=list)


def soft_assign(latents: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Student-t (one degree of freedom) soft cluster memberships."""
    d2 = ((latents[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    sim = 1.0 / (1.0 + d2)
    return sim / sim.sum(axis=1, keepdims=True)


def _soft_assign_taped(latents: Tensor, centroids: Tensor) -> Tensor:
    """Tape-recorded soft assignment for the clustering loss."""
    n, d = latents.shape
    k = centroids.shape[0]
    diff = ops.sub(ops.reshape(latents, (n, 1, d)), ops.reshape(centroids, (1, k, d)))
    d2 = ops.sum_last(ops.mul(diff, diff))
    sim = ops.div(ops.as_tensor(np.ones((n, k))), ops.add_const(d2, 1.0))
    return ops.div(sim, ops.sum_last(sim, keepdims=True))


def target_distribution(q: np.ndarray) -> np.ndarray:
    """Sharpened auxiliary targets: square memberships, renormalise by
    cluster frequency, then by row."""
    weight = q**2 / q.sum(axis=0, keepdims=True)
    return weight / weight.sum(axis=1, keepdims=True)


def cluster_kl(p: np.ndarray, q: Tensor) -> Tensor:
    """KL(P || Q) with P fixed; only Q carries gradient."""
    p = np.asarray(p, dtype=np.float64)
    const = float((p * np.log(np.where(p > 0, p, 1.0))).sum())
    cross = ops.sum_all(ops.mul(ops.as_tensor(p), ops.log(q)))
    return ops.add_const(ops.neg(cross), const)


def dec_train(
    model: PretrainAutoencoder,
    centroids: np.ndarray,
    weeks: np.ndarray,
    alpha: float,
    epochs: int,
    lr: float,
) -> tuple[PretrainAutoencoder, ClusterState]:
    """Jointly refine autoencoder and centroids against L1 + alpha * KL.

    The target distribution is refreshed once per epoch from the current
    soft assignments; each epoch takes one full-batch Adam step, so an
    alpha of zero reproduces plain reconstruction training step for step.
    """
    store = model.store
    mu = store.add("pretrain/centroids", np.asarray(centroids, dtype=np.float64),
                   "pretrain_reconstructor")
    opt = Adam(store, lr={"pretrain_reconstructor": lr}, groups=("pretrain_reconstructor",))
    x = Tensor(weeks)
    losses = []
    q_np = None
    for _ in range(epochs):
        with no_grad():
            q_np = soft_assign(model.encode(x).data, mu.data)
        p_np = target_distribution(q_np)
        opt.zero_grad()
        loss = reconstruction_loss(model, x)
        if alpha != 0.0:
            q = _soft_assign_taped(model.encode(x), mu)
            loss = ops.add(loss, ops.scale(cluster_kl(p_np, q), alpha))
        value = float(loss.data)
        if not np.isfinite(value):
            raise NumericError(
                f"clustering refinement diverged; last finite loss {losses[-1] if losses else None}"
            )
        loss.backward()
        opt.step()
        losses.append(value)

    with no_grad():
        q_np = soft_assign(model.encode(x).data, mu.data)
    p_np = target_distribution(q_np)
    state = ClusterState(
        centroids=mu.data.copy(),
        soft_assignments=q_np,
        target=p_np,
        hard_groups=hard_assign(q_np),
        alpha=alpha,
        losses=losses,
    )
    return model, state


def hard_assign(q: np.ndarray) -> list[list[int]]:
    """argmax assignment, ties to the lowest cluster index; empty groups
    are legal but logged."""
    labels = np.argmax(q, axis=1)
    groups = [[] for _ in range(q.shape[1])]
    for i, c in enumerate(labels):
        groups[int(c)].append(i)
    for k, members in enumerate(groups):
        if not members:
            logger.warning("cluster %d is empty after hard assignment", k)
    return groups
