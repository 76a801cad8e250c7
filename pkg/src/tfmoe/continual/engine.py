"""Per-task continual training loop.

Task 1 trains all experts on the full first network, partitioned by the
pre-training clusters. Every later task aggregates (a) the newly added
nodes, (b) the worst-reconstructed pre-existing nodes (replay) and
(c) synthetic weeks decoded from the frozen previous-task priors
(forgetting-resilient sampling), builds localized groups from frozen
previous-task evidence, and minimises

    prediction_loss - beta * consolidation_elbo

with warm-started parameters. Raw flow reads go through an AccessAudit:
at task > 1 the training scope is restricted to exactly the new and
replayed nodes.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Adam, ParamStore, ops
from ..cluster import (
    ClusterState,
    PretrainAutoencoder,
    dec_train,
    encode_latents,
    kmeans_init,
    pretrain_autoencoder,
)
from ..config import ExperimentConfig
from ..data import (
    AccessAudit,
    NormStats,
    TaskDataset,
    extract_week,
    fit_normalizer,
    make_windows,
    split_protocol,
)
from ..errors import InvariantError, NumericError
from ..experts import (
    PredictorExpert,
    VaeExpert,
    evidence_matrix,
    gating_weights,
    moe_predict,
    prediction_loss,
    taped_gating,
)
from ..seeding import derive_int, rng_for
from .groups import build_localized_groups, consolidation_loss
from .replay import reconstruction_based_replay
from .sampling import SyntheticWeekSet, forgetting_resilient_sampling, synchronize_samples


@dataclass
class TaskTrainReport:
    """Observability record for one trained task."""

    task_index: int
    n_nodes: int
    delta_n: int
    n_s: int
    n_r: int
    pool_size: int
    replayed_nodes: list[int]
    lg_sizes: list[int]
    epochs: list[dict]
    wall_seconds: float
    train_nodes_read: list[int]
    scoring_nodes_read: list[int]
    audit_violations: list[tuple[str, int]]

    def to_jsonl(self) -> str:
        """One structured record per epoch."""
        lines = []
        for rec in self.epochs:
            payload = {
                "task": self.task_index,
                "delta_n": self.delta_n,
                "n_s": self.n_s,
                "n_r": self.n_r,
                "pool_size": self.pool_size,
                **rec,
            }
            lines.append(json.dumps(payload, sort_keys=True))
        return "\n".join(lines)


@dataclass
class PretrainReport:
    ae_losses: list[float]
    dec_losses: list[float]
    recon_elbo: list[float]
    group_sizes: list[int]


@dataclass
class EvalResult:
    task_index: int
    nodes: list[int]
    predictions: np.ndarray  # [samples, nodes, t_out], denormalized
    truth: np.ndarray  # same shape, denormalized


@dataclass
class TFMoEState:
    """Everything that persists across tasks (and into checkpoints)."""

    config: ExperimentConfig
    steps_per_week: int
    store: ParamStore
    reconstructors: list[VaeExpert]
    predictors: list[PredictorExpert]
    pretrain_model: PretrainAutoencoder | None = None
    cluster_state: ClusterState | None = None
    norm: NormStats | None = None
    norm_history: dict[int, NormStats] = field(default_factory=dict)
    trained_tasks: int = 0
    train_rng: np.random.Generator = None
    reports: list[TaskTrainReport] = field(default_factory=list)


def initialize_state(config: ExperimentConfig, steps_per_week: int) -> TFMoEState:
    store = ParamStore()
    reconstructors = [
        VaeExpert(store, k, width=steps_per_week, d_z=config.d_z,
                  rng=rng_for(config.seed, "init-recon", k))
        for k in range(config.k)
    ]
    predictors = [
        PredictorExpert(store, k, t_in=config.t_in, t_out=config.t_out,
                        rng=rng_for(config.seed, "init-pred", k),
                        d_embed=config.d_embed, channels=config.channels,
                        m_steps=config.m_steps)
        for k in range(config.k)
    ]
    return TFMoEState(
        config=config,
        steps_per_week=steps_per_week,
        store=store,
        reconstructors=reconstructors,
        predictors=predictors,
        train_rng=rng_for(config.seed, "train"),
    )


def pretrain_stage(state: TFMoEState, task: TaskDataset) -> PretrainReport:
    """Feature extractor, clustering refinement, groups, reconstructors."""
    cfg = state.config
    split = split_protocol(task, cfg.t_in, cfg.t_out)
    state.norm = fit_normalizer(task, split.train, task.nodes)
    weeks = extract_week(task, split.train, state.norm)

    model, ae_losses = pretrain_autoencoder(
        weeks.values, d_z=cfg.d_z_pretrain, epochs=cfg.pretrain_ae_epochs,
        lr=cfg.lr_pretrain, rng=rng_for(cfg.seed, "pretrain-ae"), store=state.store,
    )
    latents = encode_latents(model, weeks.values)
    centroids = kmeans_init(latents, cfg.k, seed=cfg.seed)
    model, cluster_state = dec_train(
        model, centroids, weeks.values, alpha=cfg.alpha,
        epochs=cfg.dec_epochs, lr=cfg.lr_pretrain,
    )
    state.pretrain_model = model
    state.cluster_state = cluster_state

    from ..experts import train_group_reconstructors

    recon_hist = train_group_reconstructors(
        state.reconstructors, cluster_state.hard_groups, weeks.values,
        epochs=cfg.recon_epochs, lr=cfg.lr_recon,
        rng=rng_for(cfg.seed, "pretrain-recon"),
    )
    return PretrainReport(
        ae_losses=ae_losses,
        dec_losses=cluster_state.losses,
        recon_elbo=recon_hist,
        group_sizes=[len(g) for g in cluster_state.hard_groups],
    )


def train_task(state: TFMoEState, task: TaskDataset) -> TaskTrainReport:
    cfg = state.config
    tau = task.task_index
    if tau != state.trained_tasks + 1:
        raise InvariantError(
            f"cannot train task {tau}: state has {state.trained_tasks} trained tasks"
        )
    if state.cluster_state is None:
        raise InvariantError("pre-training stage must run before task training")
    t_start = time.perf_counter()
    split = split_protocol(task, cfg.t_in, cfg.t_out)
    audit = AccessAudit(task)
    retrained_pool = cfg.protocol == "retrained"

    synth = SyntheticWeekSet(weeks=np.empty((0, state.steps_per_week)),
                             expert_ids=np.empty(0, dtype=np.int64))
    replayed: list[int] = []
    n_s = n_r = 0

    if tau == 1:
        pool_real = list(task.nodes)
        groups = [list(g) for g in state.cluster_state.hard_groups]
        epochs = cfg.epochs_first
        allowed = None  # the whole first network is training data
        prev_norm = state.norm
    else:
        prev_norm = state.norm
        new_nodes = sorted(task.new_nodes)
        prev_nodes = [n for n in task.nodes if n not in set(new_nodes)]

        # scoring pass: frozen previous-task parameters, previous stats
        with audit.scope("scoring"):
            weeks_all = extract_week(task, split.train, prev_norm,
                                     reader=audit.flow_block)
        evidence_prev = evidence_matrix(
            state.reconstructors, weeks_all.values,
            seed=derive_int(cfg.seed, "frozen-evidence", tau),
        )
        pos = {n: i for i, n in enumerate(weeks_all.nodes)}

        if not retrained_pool:
            n_s = int(round(cfg.ns_frac * task.n_nodes))
            n_r = int(round(cfg.nr_frac * task.n_nodes))
        selection = reconstruction_based_replay(
            evidence_prev[[pos[n] for n in prev_nodes]], prev_nodes, n_r)
        replayed = selection.node_ids
        n_r = len(replayed)
        synth = forgetting_resilient_sampling(
            state.reconstructors, n_s, rng_for(cfg.seed, "sampling", tau))

        pool_real = list(task.nodes) if retrained_pool else new_nodes + sorted(replayed)
        groups = build_localized_groups(evidence_prev[[pos[n] for n in pool_real]])
        epochs = cfg.epochs_later
        allowed = None if retrained_pool else set(pool_real)

    lg_sizes = [len(g) for g in groups]
    epoch_records: list[dict] = []

    with audit.scope("train", allowed=allowed):
        block = audit.flow_block(pool_real, *split.train)
        if tau > 1:
            state.norm = NormStats(mean=float(block.mean()), std=float(block.std()))
        norm = state.norm
        state.norm_history[tau] = norm
        weeks_pool = extract_week(task, split.train, norm, nodes=pool_real,
                                  reader=audit.flow_block)
        if synth.count:
            synth_weeks = norm.normalize(prev_norm.denormalize(synth.weeks))
        else:
            synth_weeks = synth.weeks

        opt = Adam(state.store,
                   lr={"reconstructor": cfg.lr_recon, "predictor": cfg.lr_pred},
                   groups=("reconstructor", "predictor"))
        consolidate = cfg.beta != 0.0 and any(groups)

        gate_weeks = (np.vstack([weeks_pool.values, synth_weeks])
                      if synth.count else weeks_pool.values)
        d_z = state.reconstructors[0].d_z
        for epoch in range(epochs):
            batches = make_windows(
                task, split.train, norm, nodes=pool_real,
                t_in=cfg.t_in, t_out=cfg.t_out, batch_size=cfg.batch_size,
                shuffle_seed=derive_int(cfg.seed, "shuffle", tau, epoch),
                flow=block,
            )
            sum_pred = sum_consol = 0.0
            for batch in batches:
                if synth.count:
                    xs, ys = synchronize_samples(synth_weeks, batch.week_offsets,
                                                 cfg.t_in, cfg.t_out)
                    x = np.concatenate([batch.x, xs], axis=1)
                    y = np.concatenate([batch.y, ys], axis=1)
                else:
                    x, y = batch.x, batch.y
                gate_noise = state.train_rng.standard_normal((gate_weeks.shape[0], d_z))
                gating = taped_gating(state.reconstructors, gate_weeks, gate_noise)
                out = moe_predict(state.predictors, gating, x,
                                  noise_mode="train", rng=state.train_rng)
                l_pred = prediction_loss(out, y)
                if consolidate:
                    consol = consolidation_loss(state.reconstructors, groups,
                                                weeks_pool.values, state.train_rng)
                    loss = ops.sub(l_pred, ops.scale(consol, cfg.beta))
                    sum_consol += float(consol.data)
                else:
                    loss = l_pred
                if not np.isfinite(loss.data):
                    raise NumericError(f"task {tau} training diverged at epoch {epoch}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                for expert in state.reconstructors:
                    expert.clamp_prior()
                sum_pred += float(l_pred.data)
            n_batches = max(len(batches), 1)
            epoch_records.append({
                "epoch": epoch,
                "prediction_loss": sum_pred / n_batches,
                "consolidation_elbo": sum_consol / n_batches if consolidate else None,
            })

    state.trained_tasks = tau
    report = TaskTrainReport(
        task_index=tau,
        n_nodes=task.n_nodes,
        delta_n=len(task.new_nodes) if tau > 1 else task.n_nodes,
        n_s=int(synth.count),
        n_r=n_r,
        pool_size=len(pool_real) + int(synth.count),
        replayed_nodes=list(replayed),
        lg_sizes=lg_sizes,
        epochs=epoch_records,
        wall_seconds=time.perf_counter() - t_start,
        train_nodes_read=sorted(audit.report.nodes_read("train")),
        scoring_nodes_read=sorted(audit.report.nodes_read("scoring")),
        audit_violations=list(audit.report.violations),
    )
    state.reports.append(report)
    return report


def evaluate_task(state: TFMoEState, task: TaskDataset,
                  bin_range: tuple[int, int] | None = None) -> EvalResult:
    """Forecast the task's test split over its full node set."""
    from ..autodiff import no_grad

    cfg = state.config
    if state.norm is None:
        raise InvariantError("no trained state to evaluate")
    split = split_protocol(task, cfg.t_in, cfg.t_out)
    bin_range = split.test if bin_range is None else bin_range
    norm = state.norm
    weeks = extract_week(task, split.train, norm)
    evidence = evidence_matrix(
        state.reconstructors, weeks.values,
        seed=derive_int(cfg.seed, "eval-evidence", task.task_index))
    gating = gating_weights(evidence)
    batches = make_windows(task, bin_range, norm, t_in=cfg.t_in, t_out=cfg.t_out,
                           batch_size=cfg.batch_size)
    preds, truths = [], []
    with no_grad():
        for batch in batches:
            out = moe_predict(state.predictors, gating, batch.x, noise_mode="eval")
            preds.append(out.data)
            truths.append(batch.y)
    predictions = norm.denormalize(np.concatenate(preds))
    truth = norm.denormalize(np.concatenate(truths))
    return EvalResult(task_index=task.task_index, nodes=list(task.nodes),
                      predictions=predictions, truth=truth)
