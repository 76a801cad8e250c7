import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from tfmoe.autodiff import ParamStore, Tensor
from tfmoe.cluster import (
    dec_train,
    encode_latents,
    hard_assign,
    kmeans_init,
    pretrain_autoencoder,
    soft_assign,
    target_distribution,
)
from tfmoe.data import StreamSpec, extract_week, fit_normalizer, generate_stream, split_protocol
from tfmoe.errors import ConfigError
from tfmoe.seeding import rng_for


def planted_weeks(seed, nodes=30, clusters=3, noise=0.05):
    spec = StreamSpec(n_tasks=1, initial_nodes=nodes, n_clusters=clusters,
                      steps_per_day=24, days_per_task=14, noise=noise,
                      jitter=0.02, seed=seed)
    (task,) = generate_stream(spec)
    split = split_protocol(task)
    norm = fit_normalizer(task, split.train, task.nodes)
    weeks = extract_week(task, split.train, norm).values
    truth = [task.cluster_labels[n] for n in task.nodes]
    return weeks, truth


def run_clustering(weeks, k, seed, alpha=1e-4):
    model, _ = pretrain_autoencoder(weeks, d_z=16, epochs=150, lr=1e-3,
                                    rng=rng_for(seed, "ae"))
    latents = encode_latents(model, weeks)
    centroids = kmeans_init(latents, k, seed=seed)
    return dec_train(model, centroids, weeks, alpha=alpha, epochs=60, lr=1e-3)


class TestSoftAssign:
    def test_hand_case(self):
        latents = np.array([[0.0, 0.0]])
        centroids = np.array([[0.0, 0.0], [1.0, 0.0]])
        q = soft_assign(latents, centroids)
        np.testing.assert_allclose(q, [[2.0 / 3.0, 1.0 / 3.0]], atol=1e-15)

    def test_equidistant_is_uniform(self):
        latents = np.array([[0.0, 0.0]])
        centroids = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        np.testing.assert_allclose(soft_assign(latents, centroids), [[0.25] * 4], atol=1e-15)

    def test_rows_sum_to_one_and_match_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n, k, d = rng.integers(1, 8), rng.integers(1, 6), rng.integers(1, 5)
            latents = rng.normal(size=(n, d))
            centroids = rng.normal(size=(k, d))
            q = soft_assign(latents, centroids)
            np.testing.assert_allclose(q.sum(axis=1), np.ones(n), atol=1e-12)
            for i in range(n):
                sims = np.array([
                    1.0 / (1.0 + sum((latents[i, a] - centroids[j, a]) ** 2 for a in range(d)))
                    for j in range(k)
                ])
                np.testing.assert_allclose(q[i], sims / sims.sum(), atol=1e-12)


class TestTargetDistribution:
    def test_hand_case(self):
        q = np.array([[0.9, 0.1], [0.6, 0.4]])
        p = target_distribution(q)
        np.testing.assert_allclose(p, [[0.96428571, 0.03571429], [0.42857143, 0.57142857]],
                                   atol=1e-8)

    def test_one_hot_fixed_point(self):
        q = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(target_distribution(q), q, atol=1e-15)

    def test_rows_sum_to_one_and_match_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n, k = rng.integers(1, 8), rng.integers(2, 6)
            q = rng.dirichlet(np.ones(k), size=n)
            p = target_distribution(q)
            np.testing.assert_allclose(p.sum(axis=1), np.ones(n), atol=1e-12)
            f = q.sum(axis=0)
            for i in range(n):
                row = np.array([q[i, j] ** 2 / f[j] for j in range(k)])
                np.testing.assert_allclose(p[i], row / row.sum(), atol=1e-12)


class TestHardAssign:
    def test_argmax(self):
        groups = hard_assign(np.array([[0.2, 0.5, 0.3]]))
        assert groups == [[], [0], []]

    def test_tie_goes_to_lowest_index(self):
        groups = hard_assign(np.array([[0.5, 0.5]]))
        assert groups == [[0], []]

    def test_partition(self):
        rng = np.random.default_rng(3)
        q = rng.dirichlet(np.ones(4), size=25)
        groups = hard_assign(q)
        flat = sorted(i for g in groups for i in g)
        assert flat == list(range(25))


class TestKmeans:
    def test_two_separated_clouds(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(40, 2)) * 0.05 + np.array([5.0, 5.0])
        b = rng.normal(size=(40, 2)) * 0.05 - np.array([5.0, 5.0])
        points = np.concatenate([a, b])
        centroids = kmeans_init(points, 2, seed=0)
        got = sorted(centroids.tolist())
        want = sorted([b.mean(axis=0).tolist(), a.mean(axis=0).tolist()])
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_single_cluster_is_global_mean(self):
        rng = np.random.default_rng(5)
        points = rng.normal(size=(30, 3))
        centroids = kmeans_init(points, 1, seed=0)
        np.testing.assert_allclose(centroids[0], points.mean(axis=0), atol=1e-9)

    def test_duplicates_allowed(self):
        points = np.array([[0.0, 0.0]] * 5 + [[1.0, 1.0]] * 5)
        centroids = kmeans_init(points, 2, seed=1)
        got = sorted(centroids.tolist())
        np.testing.assert_allclose(got, [[0.0, 0.0], [1.0, 1.0]], atol=1e-9)

    def test_too_few_points(self):
        with pytest.raises(ConfigError):
            kmeans_init(np.zeros((2, 3)), 5, seed=0)


class TestPretrainAutoencoder:
    def test_overfits_single_node(self):
        weeks, _ = planted_weeks(seed=0, nodes=1, clusters=1)
        model, losses = pretrain_autoencoder(weeks, d_z=16, epochs=800, lr=1e-3,
                                             rng=rng_for(0, "ae"))
        # per-element reconstruction error below 5% of the mean absolute level
        per_element = losses[-1] / weeks.shape[1]
        assert per_element < 0.05 * np.abs(weeks).mean()
        assert losses[-1] < losses[0]

    def test_zero_epochs_keeps_initialization(self):
        weeks, _ = planted_weeks(seed=1, nodes=4)
        store = ParamStore()
        model, losses = pretrain_autoencoder(weeks, d_z=8, epochs=0, lr=1e-3,
                                             rng=rng_for(1, "ae"), store=store)
        assert losses == []
        fresh = ParamStore()
        ref = pretrain_autoencoder(weeks, d_z=8, epochs=0, lr=1e-3,
                                   rng=rng_for(1, "ae"), store=fresh)[0]
        for name, tensor in store.items():
            assert np.array_equal(tensor.data, fresh[name].data)

    def test_same_seed_same_final_loss(self):
        weeks, _ = planted_weeks(seed=2, nodes=8)
        _, a = pretrain_autoencoder(weeks, d_z=8, epochs=40, lr=1e-3, rng=rng_for(9, "ae"))
        _, b = pretrain_autoencoder(weeks, d_z=8, epochs=40, lr=1e-3, rng=rng_for(9, "ae"))
        assert a == b

    def test_encode_latents_width_and_determinism(self):
        weeks, _ = planted_weeks(seed=3, nodes=6)
        model, _ = pretrain_autoencoder(weeks, d_z=32, epochs=10, lr=1e-3,
                                        rng=rng_for(3, "ae"))
        latents = encode_latents(model, weeks)
        assert latents.shape == (6, 32)
        assert np.isfinite(latents).all()
        stacked = encode_latents(model, np.vstack([weeks[:1], weeks[:1]]))
        np.testing.assert_array_equal(stacked[0], stacked[1])


class TestDecTrain:
    def test_alpha_zero_matches_plain_reconstruction(self):
        weeks, _ = planted_weeks(seed=4, nodes=10)

        def build():
            model, _ = pretrain_autoencoder(weeks, d_z=8, epochs=20, lr=1e-3,
                                            rng=rng_for(4, "ae"))
            return model

        model_a = build()
        latents = encode_latents(model_a, weeks)
        centroids = kmeans_init(latents, 3, seed=4)
        _, state = dec_train(model_a, centroids, weeks, alpha=0.0, epochs=15, lr=1e-3)

        # continue plain reconstruction for 15 more full-batch steps
        from tfmoe.autodiff import Adam
        from tfmoe.cluster.autoencoder import reconstruction_loss

        model_b = build()
        opt = Adam(model_b.store, lr={"pretrain_reconstructor": 1e-3},
                   groups=("pretrain_reconstructor",))
        x = Tensor(weeks)
        plain = []
        for _ in range(15):
            opt.zero_grad()
            loss = reconstruction_loss(model_b, x)
            loss.backward()
            opt.step()
            plain.append(float(loss.data))
        np.testing.assert_allclose(state.losses, plain, rtol=0, atol=1e-12)

    def test_recovers_planted_clusters(self):
        weeks, truth = planted_weeks(seed=0)
        _, state = run_clustering(weeks, 3, seed=0)
        pred = np.argmax(state.soft_assignments, axis=1)
        assert adjusted_rand_score(truth, pred) >= 0.9

    def test_q_and_p_rows_normalized(self):
        weeks, _ = planted_weeks(seed=5, nodes=12)
        _, state = run_clustering(weeks, 3, seed=5)
        np.testing.assert_allclose(state.soft_assignments.sum(axis=1),
                                   np.ones(12), atol=1e-9)
        np.testing.assert_allclose(state.target.sum(axis=1), np.ones(12), atol=1e-9)
        flat = sorted(i for g in state.hard_groups for i in g)
        assert flat == list(range(12))

    def test_scale_invariant_recovery(self):
        weeks, truth = planted_weeks(seed=7)
        aris = []
        for scale in (0.5, 1.0, 2.0):
            _, state = run_clustering(weeks * scale, 3, seed=7)
            pred = np.argmax(state.soft_assignments, axis=1)
            aris.append(adjusted_rand_score(truth, pred))
        assert max(aris) - min(aris) <= 0.05


class TestClusterKl:
    def test_zero_when_distributions_match(self):
        from tfmoe.cluster import cluster_kl

        rng = np.random.default_rng(8)
        p = rng.dirichlet(np.ones(3), size=6)
        kl = cluster_kl(p, Tensor(p))
        assert abs(float(kl.data)) < 1e-12

    def test_nonnegative_on_random_pairs(self):
        from tfmoe.cluster import cluster_kl

        rng = np.random.default_rng(9)
        for _ in range(50):
            n, k = rng.integers(1, 6), rng.integers(2, 5)
            p = rng.dirichlet(np.ones(k), size=n)
            q = rng.dirichlet(np.ones(k), size=n)
            kl = float(cluster_kl(p, Tensor(q)).data)
            assert kl >= -1e-12
