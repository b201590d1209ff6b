import numpy as np
import pytest

from tdbound.errors import DomainError, ParameterError
from tdbound.learn import (EtaModel, MlpConfig, TrainingExample, Zoning, _loss_and_grad,
                           error_report, eta_for_customer, kmeans_fit, make_labels, mlp_train,
                           train_from_instances, zone_counts)
from tdbound.generator import GeneratorConfig, generate_instance
from tdbound.tdgraph import TimeDependentGraph, departure_times


class TestKmeans:
    def test_single_zone_is_mean(self, rng):
        pts = rng.uniform(0, 10, (30, 2))
        assert np.allclose(kmeans_fit(pts, 1).centroids[0], pts.mean(axis=0))

    def test_separated_clusters(self):
        pts = np.array([[0, 0], [0, 1], [10, 10], [10, 11]], dtype=float)
        c = kmeans_fit(pts, 2, seed=3).centroids
        assert sorted(map(tuple, c)) == [(0, 0.5), (10, 10.5)]

    def test_objective_nonincreasing(self, rng):
        for seed in range(5):
            pts = rng.uniform(0, 100, (200, 2))
            z = kmeans_fit(pts, 6, seed=seed)
            trace = np.array(z.objective_trace)
            assert np.all(np.diff(trace) <= 1e-9)
            labels = z.assign(pts)
            recomputed = sum(((pts[labels == k] - z.centroids[k]) ** 2).sum() for k in range(6))
            assert trace[-1] == pytest.approx(recomputed)

    def test_fixpoint_stable(self, rng):
        pts = rng.uniform(0, 100, (100, 2))
        z = kmeans_fit(pts, 4, seed=1)
        labels = z.assign(pts)
        means = np.array([pts[labels == k].mean(axis=0) for k in range(4)])
        assert np.allclose(means, z.centroids)

    def test_deterministic(self, rng):
        pts = rng.uniform(0, 100, (100, 2))
        assert np.array_equal(kmeans_fit(pts, 5, 9).centroids, kmeans_fit(pts, 5, 9).centroids)

    def test_too_many_zones(self):
        with pytest.raises(ParameterError):
            kmeans_fit(np.zeros((2, 2)), 3)


def line_graph():
    """Depot then customers visited 30 and 50 minutes out, plus a far one at 90."""
    c = np.array([[0, 30, 99, 99], [99, 0, 20, 99], [99, 99, 0, 40], [10, 99, 99, 0]], dtype=float)
    xy = np.array([[0, 0], [1, 0], [1.2, 0], [50, 50]], dtype=float)
    return TimeDependentGraph.from_matrix(c, coordinates=xy)


class TestLabels:
    def test_zone_means_and_mask(self):
        G = line_graph()
        zoning = Zoning(np.array([[1.0, 0.0], [50.0, 50.0], [-40.0, 0.0]]))
        ex = make_labels(G, (1, 2, 3), zoning)
        assert ex.counts.tolist() == [2, 1, 0]
        assert ex.targets[0] == 40 and ex.targets[1] == 90
        assert ex.mask.tolist() == [True, True, False] and np.isnan(ex.targets[2])

    def test_consistency_identity(self):
        G = generate_instance(GeneratorConfig(n=9, seed=4, perturbation=0.3))
        zoning = kmeans_fit(G.coordinates[1:], 4, seed=0)
        tour = tuple(range(1, 10))
        ex = make_labels(G, tour, zoning)
        arrivals = departure_times(G, tour)[1:-1]
        weighted = np.sum(ex.counts[ex.mask] * ex.targets[ex.mask]) / ex.counts.sum()
        assert weighted == pytest.approx(np.mean(arrivals), rel=1e-12)
        assert ex.counts.sum() == G.n
        assert np.array_equal(ex.counts, zone_counts(zoning, G))


def synthetic_examples(rng, K, m, target):
    out = []
    for _ in range(m):
        counts = rng.multinomial(10, np.full(K, 1 / K))
        mask = counts > 0
        t = np.where(mask, target(counts), np.nan)
        out.append(TrainingExample(counts, t, mask))
    return out


class TestMlp:
    def zoning(self, K):
        return Zoning(np.arange(2 * K, dtype=float).reshape(K, 2))

    def test_gradient(self, rng):
        K, h = 3, 5
        X = rng.integers(0, 5, (8, K)).astype(float)
        Y = rng.uniform(0, 100, (8, K))
        M = rng.uniform(size=(8, K)) > 0.3
        theta = rng.normal(size=K * h + h + h * K + K)
        _, g = _loss_and_grad(theta, X, Y, M, K, h, 0.1)
        eps = 1e-6
        for k in range(len(theta)):
            d = np.zeros_like(theta)
            d[k] = eps
            num = (_loss_and_grad(theta + d, X, Y, M, K, h, 0.1)[0]
                   - _loss_and_grad(theta - d, X, Y, M, K, h, 0.1)[0]) / (2 * eps)
            assert g[k] == pytest.approx(num, rel=1e-5, abs=1e-6)

    def test_constant_targets(self, rng):
        ex = synthetic_examples(rng, 4, 60, lambda c: np.full(4, 120.0))
        model = mlp_train(ex, self.zoning(4), seed=0)
        assert model.final_loss < 1e-4
        assert np.allclose(model.predict(ex[0].counts), 120, atol=0.05)

    def test_linear_targets_beat_mean_baseline(self, rng):
        alpha = 12.0
        ex = synthetic_examples(rng, 4, 300, lambda c: alpha * c)
        model = mlp_train(ex, self.zoning(4), seed=0)
        Y = np.array([e.targets for e in ex])
        baseline = np.nanmean(np.abs(Y - np.nanmean(Y, axis=0)), axis=0)
        assert np.all(model.per_zone_mae < baseline)
        assert model.r2 > 0.5

    def test_predictions_within_reported_error(self, rng):
        ex = synthetic_examples(rng, 3, 200, lambda c: 30 + 8 * c)
        model = mlp_train(ex, self.zoning(3), seed=1)
        errs = np.array([np.abs(model.predict(e.counts) - e.targets) for e in ex])
        masks = np.array([e.mask for e in ex])
        mean_err = np.array([errs[masks[:, k], k].mean() for k in range(3)])
        assert np.all(mean_err <= 2 * model.per_zone_mae + 1.0)

    def test_shapes_totality_and_determinism(self, rng):
        ex = synthetic_examples(rng, 5, 40, lambda c: 10 * c + 5)
        a = mlp_train(ex, self.zoning(5), seed=2, config=MlpConfig(max_iter=200))
        b = mlp_train(ex, self.zoning(5), seed=2, config=MlpConfig(max_iter=200))
        assert np.array_equal(a.W1, b.W1) and np.array_equal(a.per_zone_mae, b.per_zone_mae)
        out = a.predict(np.zeros(5))
        assert out.shape == (5,) and np.all(np.isfinite(out)) and np.all(out >= 0)
        assert np.all(a.per_zone_mae >= 0)
        with pytest.raises(DomainError):
            a.predict(np.zeros(4))

    def test_permuting_counts_changes_output(self, rng):
        ex = synthetic_examples(rng, 3, 80, lambda c: np.array([5.0, 20.0, 60.0]) * c)
        model = mlp_train(ex, self.zoning(3), seed=0)
        c = np.array([1.0, 3.0, 6.0])
        assert not np.allclose(model.predict(c), model.predict(c[::-1]))

    def test_needs_examples(self):
        with pytest.raises(ParameterError):
            mlp_train([], self.zoning(2))


def test_eta_lookup_and_report():
    graphs = [generate_instance(GeneratorConfig(n=8, seed=21, index=i, perturbation=0.3))
              for i in range(12)]
    model = train_from_instances(graphs, 3, seed=0)
    G = graphs[0]
    pred = model.predict(zone_counts(model.zoning, G))
    zones = model.zoning.assign(G.coordinates)
    for i in range(1, G.n + 1):
        f, eps = eta_for_customer(model, G, i)
        assert (f, eps) == (pred[zones[i]], model.per_zone_mae[zones[i]]) and eps >= 0
    with pytest.raises(DomainError):
        eta_for_customer(model, G, 0)
    report = error_report(model)
    assert report.splitlines()[0].split() == ["Zone", "Mean", "error", "Mean", "absolute",
                                              "error", "Standard", "error"]
    assert len(report.splitlines()) == 3 + 3
