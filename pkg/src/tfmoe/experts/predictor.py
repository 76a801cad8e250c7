"""Per-expert predictors: learned adjacency, diffusion layer, temporal convs.

Graph structure is learned from the input window itself (pairwise scores
over node embeddings plus Gumbel noise, row softmax), so synthetic rehearsal
nodes participate in spatial propagation exactly like real sensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import ParamStore, Tensor, glorot_uniform
from ..autodiff import ops
from ..errors import DimensionError

GUMBEL_CLIP = 1e-12


class PredictorExpert:
    """One expert's forecasting stack.

    embed_map (t_in -> d_embed) and pair_map (2*d_embed -> 1) parameterise
    the learned adjacency; a diffusion layer maps the window to t_out
    features per node, and two same-padded kernel-3 temporal convolutions
    (hidden channel count ``channels``, ReLU between) refine them into the
    forecast.
    """

    def __init__(self, store: ParamStore, index: int, t_in: int, t_out: int,
                 rng: np.random.Generator, d_embed: int = 32, channels: int = 32,
                 m_steps: int = 1):
        self.store = store
        self.index = index
        self.t_in = t_in
        self.t_out = t_out
        self.d_embed = d_embed
        self.channels = channels
        self.m_steps = m_steps
        prefix = f"expert{index}/pred"
        g = "predictor"
        self.embed_w = store.add(f"{prefix}/embed/weight",
                                 glorot_uniform(rng, (t_in, d_embed), t_in, d_embed), g)
        self.embed_b = store.add(f"{prefix}/embed/bias", np.zeros(d_embed), g)
        self.pair_w = store.add(f"{prefix}/pair/weight",
                                glorot_uniform(rng, (2 * d_embed, 1), 2 * d_embed, 1), g)
        self.pair_b = store.add(f"{prefix}/pair/bias", np.zeros(1), g)
        self.diffusion = store.add(
            f"{prefix}/diffusion",
            glorot_uniform(rng, (t_out, t_in, m_steps, 2), t_in * m_steps * 2, t_out), g)
        self.conv1_k = store.add(f"{prefix}/conv1/kernel",
                                 glorot_uniform(rng, (channels, 1, 3), 3, channels * 3), g)
        self.conv1_b = store.add(f"{prefix}/conv1/bias", np.zeros((channels, 1)), g)
        self.conv2_k = store.add(f"{prefix}/conv2/kernel",
                                 glorot_uniform(rng, (1, channels, 3), channels * 3, 3), g)
        self.conv2_b = store.add(f"{prefix}/conv2/bias", np.zeros((1, 1)), g)


@dataclass
class LearnedAdjacency:
    """Row-stochastic adjacency over an ordered node set."""

    matrix: np.ndarray
    nodes: list[int]


def gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    u = np.clip(rng.random(shape), GUMBEL_CLIP, 1.0 - GUMBEL_CLIP)
    return -np.log(-np.log(u))


def learn_adjacency(expert: PredictorExpert, x, noise_mode: str = "eval",
                    rng: np.random.Generator | None = None) -> Tensor:
    """Adjacency from pairwise embedding scores.

    x: [..., N, t_in]. In ``train`` mode fresh Gumbel noise perturbs the
    pair logits (rng required); ``eval`` mode is deterministic.
    """
    x = ops.as_tensor(x)
    n = x.shape[-2]
    if n < 2:
        raise DimensionError("graph learning needs at least 2 nodes")
    e = ops.apply_linear(x, expert.embed_w, expert.embed_b)
    scores = ops.apply_linear(ops.pairwise_concat(e), expert.pair_w, expert.pair_b)
    w = ops.reshape(scores, (*x.shape[:-1], n))
    if noise_mode == "train":
        if rng is None:
            raise ValueError("train-mode adjacency needs an rng for the Gumbel draw")
        w = ops.add(w, gumbel_noise(w.shape, rng))
    elif noise_mode != "eval":
        raise ValueError(f"unknown noise_mode: {noise_mode!r}")
    return ops.softmax_rows(w)


def adjacency_over_nodes(expert: PredictorExpert, x, nodes) -> LearnedAdjacency:
    """Deterministic adjacency snapshot with its node ordering attached."""
    from ..autodiff import no_grad

    with no_grad():
        a = learn_adjacency(expert, x, noise_mode="eval")
    return LearnedAdjacency(matrix=a.data, nodes=list(nodes))


def predictor_forward(expert: PredictorExpert, adjacency, x) -> Tensor:
    """Diffusion over the learned graph, then two temporal convolutions.

    x: [..., N, t_in] -> [..., N, t_out].
    """
    x = ops.as_tensor(x)
    lead = x.shape[:-2]
    n = x.shape[-2]
    if x.shape[-1] != expert.t_in:
        raise DimensionError(f"expected window length {expert.t_in}, got {x.shape[-1]}")
    h = ops.relu(ops.diffusion_convolution(adjacency, x, expert.diffusion))
    flat = ops.reshape(h, (int(np.prod(lead, initial=1)) * n, 1, expert.t_out))
    c1 = ops.conv1d(ops.pad_last(flat, 1, 1), expert.conv1_k)
    c1 = ops.relu(ops.add(c1, expert.conv1_b))
    c2 = ops.conv1d(ops.pad_last(c1, 1, 1), expert.conv2_k)
    c2 = ops.add(c2, expert.conv2_b)
    return ops.reshape(c2, (*lead, n, expert.t_out))


def gating_weights(evidence: np.ndarray) -> np.ndarray:
    """Row-softmax of log-evidence, i.e. evidences normalised per node."""
    evidence = np.asarray(evidence, dtype=np.float64)
    shifted = evidence - evidence.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def taped_gating(reconstructors, weeks: np.ndarray, noise: np.ndarray) -> Tensor:
    """Differentiable gating from per-expert week evidence.

    The prediction loss backpropagates through this softmax into the
    reconstructors, which is exactly what makes them collapse onto the
    currently-easy nodes when nothing anchors them; the consolidation term
    exists to counteract that. One shared noise draw per node keeps the
    expert comparison fair.
    """
    from .reconstructor import elbo_rows

    cols = [
        ops.reshape(elbo_rows(expert, weeks, noise), (weeks.shape[0], 1))
        for expert in reconstructors
    ]
    log_evidence = cols[0]
    for col in cols[1:]:
        log_evidence = ops.concat(log_evidence, col, axis=1)
    return ops.softmax_rows(log_evidence)


def moe_predict(experts: list[PredictorExpert], gating, x,
                noise_mode: str = "eval", rng: np.random.Generator | None = None) -> Tensor:
    """Gating-weighted sum of per-expert forecasts.

    gating rows follow the node order of ``x``'s node axis; a Tensor gating
    (from ``taped_gating``) keeps the reconstructors in the gradient path,
    a plain array is treated as constant weights. Each expert learns its
    own adjacency over the batch's node set.
    """
    x = ops.as_tensor(x)
    gating_is_tensor = isinstance(gating, Tensor)
    out = None
    for k, expert in enumerate(experts):
        adjacency = learn_adjacency(expert, x, noise_mode=noise_mode, rng=rng)
        pred = predictor_forward(expert, adjacency, x)
        if gating_is_tensor:
            n = gating.shape[0]
            g_col = ops.reshape(ops.index_last(gating, k), (n, 1))
        else:
            g_col = ops.as_tensor(gating[:, k : k + 1])
        term = ops.mul(pred, g_col)
        out = term if out is None else ops.add(out, term)
    return out


def prediction_loss(pred, target) -> Tensor:
    """L1 forecasting loss, averaged over all elements for scale stability."""
    return ops.mae(pred, target)
