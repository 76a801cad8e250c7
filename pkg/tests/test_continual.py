import numpy as np
import pytest

from tfmoe.autodiff import ParamStore
from tfmoe.config import ExperimentConfig
from tfmoe.continual import (
    build_localized_groups,
    consolidation_loss,
    forgetting_resilient_sampling,
    initialize_state,
    pretrain_stage,
    reconstruction_based_replay,
    sample_counts,
    synchronize_samples,
    train_task,
)
from tfmoe.data import StreamSpec, generate_stream, split_protocol
from tfmoe.errors import InvariantError
from tfmoe.experts import VaeExpert, evidence_matrix
from tfmoe.seeding import derive_int, rng_for


def desk_config(**overrides):
    base = dict(
        k=3, d_z_pretrain=16, d_z=8, d_embed=16, channels=16, m_steps=1,
        alpha=1e-4, beta=0.1, ns_frac=0.09, nr_frac=0.05,
        batch_size=32, epochs_first=6, epochs_later=4,
        pretrain_ae_epochs=80, dec_epochs=30, recon_epochs=100,
        lr_recon=1e-3, seed=0, protocol="tfmoe",
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def desk_stream(seed=0, n_tasks=3, initial=18, added=6):
    spec = StreamSpec(n_tasks=n_tasks, initial_nodes=initial, added_per_task=added,
                      n_clusters=3, steps_per_day=12, days_per_task=16,
                      noise=0.05, jitter=0.02, drift=0.08, seed=seed)
    return generate_stream(spec)


def run_stream(config, tasks):
    state = initialize_state(config, steps_per_week=tasks[0].steps_per_week)
    pretrain_stage(state, tasks[0])
    reports = [train_task(state, task) for task in tasks]
    return state, reports


class TestLocalizedGroups:
    def test_argmax_assignment(self):
        groups = build_localized_groups(np.array([[-3.0, -1.0, -7.0]]))
        assert groups == [[], [0], []]

    def test_all_nodes_on_one_expert_is_legal(self):
        evidence = np.array([[0.0, -1.0], [1.0, -2.0], [5.0, 0.0]])
        groups = build_localized_groups(evidence)
        assert groups == [[0, 1, 2], []]

    def test_empty_evidence(self):
        assert build_localized_groups(np.empty((0, 4))) == [[], [], [], []]

    def test_tie_to_lowest_expert(self):
        groups = build_localized_groups(np.array([[2.0, 2.0]]))
        assert groups == [[0], []]


class TestConsolidationLoss:
    def _experts(self, k=2, width=12, d_z=3):
        store = ParamStore()
        return [VaeExpert(store, i, width=width, d_z=d_z,
                          rng=rng_for(i, "ce"), hidden=(8, 6)) for i in range(k)]

    def test_empty_groups_zero(self):
        experts = self._experts()
        weeks = np.random.default_rng(0).normal(size=(4, 12))
        loss = consolidation_loss(experts, [[], []], weeks, rng_for(0, "n"))
        assert float(loss.data) == 0.0

    def test_matches_sum_of_member_elbos(self):
        from tfmoe.experts import vae_elbo

        experts = self._experts()
        weeks = np.random.default_rng(1).normal(size=(5, 12))
        groups = [[0, 2], [1, 4]]
        got = float(consolidation_loss(experts, groups, weeks, rng_for(1, "n")).data)
        # replicate with the identical noise stream
        rng = rng_for(1, "n")
        expected = 0.0
        for expert, group in zip(experts, groups):
            noise = rng.standard_normal((len(group), expert.d_z))
            expected += float(vae_elbo(expert, weeks[group], noise).data)
        assert got == pytest.approx(expected, abs=1e-12)


class TestSampling:
    def test_floor_remainder_counts(self):
        assert sample_counts(10, 4) == [3, 3, 2, 2]
        assert sample_counts(0, 3) == [0, 0, 0]
        assert sample_counts(7, 7) == [1] * 7

    def test_zero_samples_empty(self):
        store = ParamStore()
        experts = [VaeExpert(store, 0, width=10, d_z=2, rng=rng_for(0, "s"), hidden=(6, 4))]
        out = forgetting_resilient_sampling(experts, 0, rng_for(0, "n"))
        assert out.count == 0 and out.weeks.shape == (0, 10)

    def test_tags_follow_counts(self):
        store = ParamStore()
        experts = [VaeExpert(store, i, width=10, d_z=2, rng=rng_for(i, "s"), hidden=(6, 4))
                   for i in range(3)]
        out = forgetting_resilient_sampling(experts, 8, rng_for(1, "n"))
        assert out.count == 8
        assert list(np.bincount(out.expert_ids, minlength=3)) == [3, 3, 2]


class TestSynchronize:
    def test_wraparound_at_offset_zero(self):
        week = np.arange(10.0).reshape(1, 10)
        x, y = synchronize_samples(week, np.array([0]), t_in=2, t_out=2)
        np.testing.assert_array_equal(x[0, 0], [9.0, 0.0])
        np.testing.assert_array_equal(y[0, 0], [1.0, 2.0])

    def test_aligned_offsets(self):
        week = np.arange(12.0).reshape(1, 12)
        x, y = synchronize_samples(week, np.array([5, 5]), t_in=3, t_out=2)
        np.testing.assert_array_equal(x[0], x[1])
        np.testing.assert_array_equal(x[0, 0], [3.0, 4.0, 5.0])
        np.testing.assert_array_equal(y[0, 0], [6.0, 7.0])

    def test_constant_week_constant_slices(self):
        week = np.full((2, 8), 3.5)
        x, y = synchronize_samples(week, np.array([1, 4, 7]), t_in=2, t_out=2)
        assert (x == 3.5).all() and (y == 3.5).all()
        assert x.shape == (3, 2, 2) and y.shape == (3, 2, 2)


class TestReplay:
    def test_hand_case(self):
        evidence = np.array([[-5.0, -5.0], [-1.0, -1.0], [-3.0, -3.0]])
        sel = reconstruction_based_replay(evidence, ["a", "b", "c"], 2)
        assert sel.node_ids == ["a", "c"]
        assert sel.scores == [-10.0, -6.0]

    def test_zero_selection(self):
        sel = reconstruction_based_replay(np.zeros((3, 2)), [1, 2, 3], 0)
        assert sel.node_ids == []

    def test_clamps_with_warning(self, caplog):
        sel = reconstruction_based_replay(np.zeros((2, 1)), [5, 6], 9)
        assert sel.node_ids == [5, 6]

    def test_matches_brute_force_sort(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n, k = int(rng.integers(1, 12)), int(rng.integers(1, 5))
            evidence = rng.normal(size=(n, k))
            ids = list(rng.permutation(1000)[:n])
            n_r = int(rng.integers(0, n + 1))
            sel = reconstruction_based_replay(evidence, ids, n_r)
            totals = evidence.sum(axis=1)
            brute = sorted(zip(totals, ids))[:n_r]
            assert sel.node_ids == [i for _, i in brute]
        # ascending scores along the selection
        assert sel.scores == sorted(sel.scores)


class TestTrainTask:
    def test_three_task_bookkeeping(self):
        spec = StreamSpec(n_tasks=3, initial_nodes=30, added_per_task=10,
                          n_clusters=3, steps_per_day=12, days_per_task=16,
                          noise=0.05, seed=1)
        tasks = generate_stream(spec)
        cfg = desk_config(epochs_first=2, epochs_later=2, ns_frac=0.09, nr_frac=0.01)
        state, reports = run_stream(cfg, tasks)
        assert [t.n_nodes for t in tasks] == [30, 40, 50]
        for task, report in zip(tasks[1:], reports[1:]):
            assert report.n_s == round(0.09 * task.n_nodes)
            assert report.n_r == round(0.01 * task.n_nodes)
            assert report.pool_size == report.delta_n + report.n_s + report.n_r
            assert report.n_r <= task.n_nodes - report.delta_n

    def test_access_audit_exact_set(self):
        tasks = desk_stream(seed=2)
        cfg = desk_config(epochs_later=2, epochs_first=2)
        state, reports = run_stream(cfg, tasks)
        for task, report in zip(tasks[1:], reports[1:]):
            expected = sorted(set(task.new_nodes) | set(report.replayed_nodes))
            assert report.train_nodes_read == expected
            assert report.audit_violations == []
            # scoring saw every node of the current task
            assert report.scoring_nodes_read == sorted(task.nodes)

    def test_frozen_evidence_snapshot(self):
        tasks = desk_stream(seed=3, n_tasks=2)
        cfg = desk_config(epochs_first=2, epochs_later=3)
        state = initialize_state(cfg, steps_per_week=tasks[0].steps_per_week)
        pretrain_stage(state, tasks[0])
        train_task(state, tasks[0])

        # snapshot reconstructor params and stats before task 2
        frozen = state.store.snapshot()
        prev_norm = state.norm
        report = train_task(state, tasks[1])

        # recompute LG / V_R with the frozen snapshot: must match the report
        from tfmoe.data import extract_week

        restore = initialize_state(cfg, steps_per_week=tasks[0].steps_per_week)
        pretrain_stage(restore, tasks[0])
        train_task(restore, tasks[0])
        restore.store.load_values(frozen)
        task = tasks[1]
        split = split_protocol(task, cfg.t_in, cfg.t_out)
        weeks = extract_week(task, split.train, prev_norm)
        evidence = evidence_matrix(restore.reconstructors, weeks.values,
                                   seed=derive_int(cfg.seed, "frozen-evidence", 2))
        pos = {n: i for i, n in enumerate(weeks.nodes)}
        prev_nodes = [n for n in task.nodes if n not in set(task.new_nodes)]
        sel = reconstruction_based_replay(
            evidence[[pos[n] for n in prev_nodes]], prev_nodes,
            int(round(cfg.nr_frac * task.n_nodes)))
        assert sel.node_ids == report.replayed_nodes
        pool = sorted(task.new_nodes) + sorted(sel.node_ids)
        groups = build_localized_groups(evidence[[pos[n] for n in pool]])
        assert [len(g) for g in groups] == report.lg_sizes

    def test_expansible_identity_with_zeroed_mechanisms(self):
        tasks = desk_stream(seed=4, n_tasks=2)
        cfg_a = desk_config(protocol="expansible", epochs_first=2, epochs_later=2)
        cfg_b = desk_config(protocol="tfmoe", beta=0.0, ns_frac=0.0, nr_frac=0.0,
                            epochs_first=2, epochs_later=2)
        from tfmoe.bench import engine_config

        state_a, _ = run_stream(engine_config(cfg_a), tasks)
        state_b, _ = run_stream(cfg_b, tasks)
        for name, tensor in state_a.store.items():
            assert np.array_equal(tensor.data, state_b.store[name].data), name

    def test_gating_gradient_reaches_reconstructors(self):
        # the prediction loss trains reconstructors through the gate even
        # with beta = 0; only the consolidation term anchors them
        tasks = desk_stream(seed=5, n_tasks=2)
        cfg = desk_config(beta=0.0, ns_frac=0.0, nr_frac=0.0,
                          epochs_first=2, epochs_later=3)
        state = initialize_state(cfg, steps_per_week=tasks[0].steps_per_week)
        pretrain_stage(state, tasks[0])
        train_task(state, tasks[0])
        before = {n: t.data.copy() for n, t in state.store.group_items("reconstructor")}
        train_task(state, tasks[1])
        changed = any(
            not np.array_equal(arr, state.store[name].data)
            for name, arr in before.items()
        )
        assert changed

    def test_out_of_order_task_rejected(self):
        tasks = desk_stream(seed=6, n_tasks=2)
        cfg = desk_config()
        state = initialize_state(cfg, steps_per_week=tasks[0].steps_per_week)
        pretrain_stage(state, tasks[0])
        with pytest.raises(InvariantError):
            train_task(state, tasks[1])

    def test_retrained_uses_all_nodes(self):
        tasks = desk_stream(seed=7, n_tasks=2)
        cfg = desk_config(protocol="retrained", epochs_first=2, epochs_later=2)
        state, reports = run_stream(cfg, tasks)
        assert reports[1].pool_size == tasks[1].n_nodes
        assert reports[1].train_nodes_read == sorted(tasks[1].nodes)
        assert reports[1].n_s == 0 and reports[1].n_r == 0

    def test_epoch_log_lines(self):
        tasks = desk_stream(seed=8, n_tasks=1)
        cfg = desk_config(epochs_first=3)
        state, reports = run_stream(cfg, tasks)
        lines = reports[0].to_jsonl().splitlines()
        assert len(lines) == 3
        import json

        rec = json.loads(lines[0])
        assert rec["task"] == 1 and "prediction_loss" in rec
