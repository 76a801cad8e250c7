import numpy as np
import pytest

from tfmoe.autodiff import ParamStore, no_grad
from tfmoe.data import StreamSpec, extract_week, fit_normalizer, generate_stream, split_protocol
from tfmoe.experts import (
    VaeExpert,
    evidence_matrix,
    gating_weights,
    sample_prior,
    train_group_reconstructors,
    vae_elbo,
)
from tfmoe.seeding import rng_for

LOG_2PI = np.log(2.0 * np.pi)


def make_expert(width=10, d_z=3, seed=0, hidden=(12, 6), store=None, index=0):
    store = store if store is not None else ParamStore()
    return VaeExpert(store, index, width=width, d_z=d_z, rng=rng_for(seed, "vae"), hidden=hidden)


def planted_setup(seed, nodes=36, clusters=3):
    spec = StreamSpec(n_tasks=1, initial_nodes=nodes, n_clusters=clusters,
                      steps_per_day=24, days_per_task=14, noise=0.05, jitter=0.02,
                      seed=seed)
    (task,) = generate_stream(spec)
    split = split_protocol(task)
    norm = fit_normalizer(task, split.train, task.nodes)
    weeks = extract_week(task, split.train, norm).values
    labels = np.array([task.cluster_labels[n] for n in task.nodes])
    return weeks, labels


class TestElbo:
    def test_perfect_reconstruction_at_prior(self):
        expert = make_expert(width=6, d_z=2, seed=1)
        # encoder heads forced onto the prior: zero weights, zero biases
        for w, b in (expert.enc_mean, expert.enc_log_var):
            w.data[:] = 0.0
            b.data[:] = 0.0
        # with zero noise, z = 0; pick x as exactly decode(0)
        with no_grad():
            x = expert.decode(np.zeros((1, 2))).data
        noise = np.zeros((1, 2))
        elbo = float(vae_elbo(expert, x, noise).data)
        assert elbo == pytest.approx(-(6 / 2) * LOG_2PI, abs=1e-12)

    def test_kl_component_nonnegative(self):
        expert = make_expert(seed=2)
        rng = np.random.default_rng(0)
        from tfmoe.autodiff import ops

        for _ in range(20):
            x = rng.normal(size=(4, 10))
            with no_grad():
                qm, ql = expert.encode(x)
                kl = ops.gaussian_kl_rows(qm, ql, expert.prior_mean, expert.prior_log_var)
            assert (kl.data >= -1e-9).all()

    def test_matches_brute_force_toy(self):
        # d_z=1, width=2: evaluate both ELBO terms with independent numpy math
        expert = make_expert(width=2, d_z=1, seed=3, hidden=(4, 3))
        rng = np.random.default_rng(7)
        x = rng.normal(size=(1, 2))
        eps = rng.standard_normal((1, 1))

        def lin(v, pair):
            w, b = pair
            return v @ w.data + b.data

        h = np.maximum(lin(x, expert.enc1), 0.0)
        h = np.maximum(lin(h, expert.enc2), 0.0)
        q_mean, q_log_var = lin(h, expert.enc_mean), lin(h, expert.enc_log_var)
        z = q_mean + np.exp(0.5 * q_log_var) * eps
        d = np.maximum(lin(z, expert.dec1), 0.0)
        d = np.maximum(lin(d, expert.dec2), 0.0)
        x_hat = lin(d, expert.dec3)
        recon = -0.5 * ((x - x_hat) ** 2).sum() - (2 / 2) * LOG_2PI
        pm, pl = expert.prior_mean.data, expert.prior_log_var.data
        kl = 0.5 * (
            np.exp(q_log_var - pl)
            + (q_mean - pm) ** 2 / np.exp(pl)
            - 1.0
            + pl
            - q_log_var
        ).sum()
        expected = recon - kl
        got = float(vae_elbo(expert, x, eps).data)
        assert got == pytest.approx(expected, abs=1e-10)


class TestGroupTraining:
    def test_overfits_single_node(self):
        weeks, _ = planted_setup(seed=0, nodes=1, clusters=1)
        store = ParamStore()
        expert = VaeExpert(store, 0, width=weeks.shape[1], d_z=8,
                           rng=rng_for(0, "vae"), hidden=(64, 32))
        train_group_reconstructors([expert], [[0]], weeks, epochs=1500, lr=3e-3,
                                   rng=rng_for(0, "train"))
        noise = np.zeros((1, 8))
        with no_grad():
            qm, _ = expert.encode(weeks)
            recon = expert.decode(qm).data
        per_dim = np.abs(recon - weeks).mean()
        assert per_dim < 0.1

    def test_empty_group_leaves_expert_untouched(self):
        weeks, _ = planted_setup(seed=1, nodes=6, clusters=2)
        store = ParamStore()
        e0 = VaeExpert(store, 0, width=weeks.shape[1], d_z=4, rng=rng_for(1, "a"), hidden=(8, 4))
        e1 = VaeExpert(store, 1, width=weeks.shape[1], d_z=4, rng=rng_for(1, "b"), hidden=(8, 4))
        before = {n: t.data.copy() for n, t in store.items() if n.startswith("expert1")}
        train_group_reconstructors([e0, e1], [[0, 1, 2], []], weeks, epochs=10,
                                   lr=1e-4, rng=rng_for(1, "t"))
        for name, arr in before.items():
            assert np.array_equal(arr, store[name].data), name

    def test_mean_elbo_improves(self):
        weeks, labels = planted_setup(seed=2, nodes=12, clusters=2)
        store = ParamStore()
        experts = [
            VaeExpert(store, k, width=weeks.shape[1], d_z=6, rng=rng_for(2, "v", k),
                      hidden=(32, 16))
            for k in range(2)
        ]
        groups = [list(np.where(labels == k)[0]) for k in range(2)]
        history = train_group_reconstructors(experts, groups, weeks, epochs=120,
                                             lr=1e-3, rng=rng_for(2, "t"))
        smooth = np.convolve(history, np.ones(5) / 5, mode="valid")
        assert smooth[-1] > smooth[0]
        # monotone after smoothing, small tolerance for reparameterization noise
        span = smooth.max() - smooth.min()
        assert (np.diff(smooth) >= -0.05 * span).all()


class TestEvidence:
    def test_identical_experts_equal_columns(self):
        store = ParamStore()
        a = make_expert(seed=5, store=store, index=0)
        b = make_expert(seed=5, store=ParamStore(), index=0)
        weeks = np.random.default_rng(0).normal(size=(7, 10))
        ev = evidence_matrix([a, b], weeks, seed=11)
        np.testing.assert_allclose(ev[:, 0], ev[:, 1], atol=1e-12)

    def test_deterministic_for_seed(self):
        expert = make_expert(seed=6)
        weeks = np.random.default_rng(1).normal(size=(5, 10))
        one = evidence_matrix([expert], weeks, seed=3)
        two = evidence_matrix([expert], weeks, seed=3)
        assert np.array_equal(one, two)

    def test_gating_invariant_to_row_shift(self):
        rng = np.random.default_rng(2)
        ev = rng.normal(size=(6, 4))
        g1 = gating_weights(ev)
        g2 = gating_weights(ev + rng.normal(size=(6, 1)))
        np.testing.assert_allclose(g1, g2, atol=1e-12)

    def test_matching_on_held_out_nodes(self):
        weeks, labels = planted_setup(seed=0, nodes=45, clusters=3)
        train_idx = np.arange(30)
        held_idx = np.arange(30, 45)
        store = ParamStore()
        experts = [
            VaeExpert(store, k, width=weeks.shape[1], d_z=8, rng=rng_for(0, "v", k),
                      hidden=(64, 32))
            for k in range(3)
        ]
        groups = [list(train_idx[labels[train_idx] == k]) for k in range(3)]
        train_group_reconstructors(experts, groups, weeks, epochs=200, lr=1e-3,
                                   rng=rng_for(0, "t"))
        ev = evidence_matrix(experts, weeks[held_idx], seed=5)
        pred = ev.argmax(axis=1)
        acc = (pred == labels[held_idx]).mean()
        assert acc >= 0.9


class TestSamplePrior:
    def test_zero_count(self):
        expert = make_expert(seed=7)
        assert sample_prior(expert, 0, rng_for(0, "s")).shape == (0, 10)

    def test_collapsed_prior_is_deterministic_decode(self):
        expert = make_expert(seed=8)
        expert.prior_log_var.data[:] = -20.0
        samples = sample_prior(expert, 4, rng_for(1, "s"))
        with no_grad():
            ref = expert.decode(expert.prior_mean.data.reshape(1, -1)).data[0]
        np.testing.assert_allclose(samples, np.tile(ref, (4, 1)), atol=1e-3)

    def test_reproducible_bitwise(self):
        expert = make_expert(seed=9)
        a = sample_prior(expert, 5, rng_for(2, "s"))
        b = sample_prior(expert, 5, rng_for(2, "s"))
        assert np.array_equal(a, b)

    def test_samples_stay_near_own_cluster_template(self):
        weeks, labels = planted_setup(seed=3, nodes=30, clusters=2)
        store = ParamStore()
        experts = [
            VaeExpert(store, k, width=weeks.shape[1], d_z=6, rng=rng_for(3, "v", k),
                      hidden=(48, 24))
            for k in range(2)
        ]
        groups = [list(np.where(labels == k)[0]) for k in range(2)]
        train_group_reconstructors(experts, groups, weeks, epochs=250, lr=1e-3,
                                   rng=rng_for(3, "t"))
        template = [weeks[labels == k].mean(axis=0) for k in range(2)]
        hits = total = 0
        for k, expert in enumerate(experts):
            draws = sample_prior(expert, 20, rng_for(4, "s", k))
            for row in draws:
                own = np.linalg.norm(row - template[k])
                other = np.linalg.norm(row - template[1 - k])
                hits += own < other
                total += 1
        assert hits / total >= 0.9


def test_evidence_invariant_to_expert_order():
    store = ParamStore()
    experts = [
        VaeExpert(store, k, width=10, d_z=3, rng=rng_for(20 + k, "vae"), hidden=(12, 6))
        for k in range(3)
    ]
    weeks = np.random.default_rng(4).normal(size=(6, 10))
    forward = evidence_matrix(experts, weeks, seed=7)
    shuffled = evidence_matrix([experts[2], experts[0], experts[1]], weeks, seed=7)
    np.testing.assert_array_equal(forward[:, [2, 0, 1]], shuffled)
