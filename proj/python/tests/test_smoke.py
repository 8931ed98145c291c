import numpy as np
import pytest
from scipy.linalg import expm, logm
from sklearn.metrics import calinski_harabasz_score, davies_bouldin_score, silhouette_score

import spdstats as sp


def random_spd(rng, p):
    a = rng.standard_normal((p, p))
    return a @ a.T + p * np.eye(p)


def test_metric_round_trip():
    rng = np.random.default_rng(0)
    for metric in sp.metrics():
        ref, point = random_spd(rng, 4), random_spd(rng, 4)
        back = sp.exp(metric, ref, sp.log(metric, ref, point))
        assert np.allclose(back, point, rtol=1e-8, atol=1e-10)
        v = sp.log(metric, ref, point)
        assert np.allclose(sp.unvec(metric, ref, sp.vec(metric, ref, v)), v, atol=1e-10)


def test_airm_distance_closed_form():
    a = np.diag([1.0, 2.0, 4.0])
    assert sp.distance("airm", np.eye(3), a) == pytest.approx(np.sqrt(np.log(2) ** 2 + np.log(4) ** 2))


def test_transport_unsupported():
    with pytest.raises(sp.UnsupportedMetric):
        sp.parallel_transport("log-cholesky", np.eye(2), 2 * np.eye(2), np.eye(2))


def test_rspdnorm_shape_and_determinism():
    a = sp.rspdnorm(30, np.eye(5), np.eye(15), "airm", seed=3)
    b = sp.rspdnorm(30, np.eye(5), np.eye(15), "airm", seed=3)
    assert a.shape == (30, 5, 5)
    assert np.array_equal(a, b)
    assert all(np.linalg.eigvalsh(m).min() > 0 for m in a)
    with pytest.raises(sp.ShapeError, match="465"):
        sp.rspdnorm(2, np.eye(30), np.eye(10))


def test_frechet_mean_oracles():
    rng = np.random.default_rng(1)
    pts = np.stack([random_spd(rng, 3) for _ in range(12)])
    r = sp.frechet_mean(pts, "euclidean", lr=1.0, tol=1e-12, max_iter=50)
    assert np.abs(r["mean"] - pts.mean(axis=0)).max() < 1e-10
    r = sp.frechet_mean(pts, "log-euclidean", lr=1.0, tol=1e-12, max_iter=50)
    expected = expm(np.mean([logm(m) for m in pts], axis=0)).real
    assert np.abs(r["mean"] - expected).max() < 1e-6
    s = random_spd(rng, 3)
    r = sp.frechet_mean(np.stack([s, np.linalg.inv(s)]), "airm", lr=1.0, tol=1e-10, max_iter=200,
                        line_search=True)
    assert r["converged"]
    assert np.abs(r["mean"] - np.eye(3)).max() < 1e-6


def test_frechet_mean_thread_independent():
    pts = sp.rspdnorm(40, np.eye(4), np.eye(10), seed=2)
    results = []
    for t in (1, 2, 4):
        sp.set_num_threads(t)
        results.append(sp.frechet_mean(pts, batch_size=8, seed=5)["mean"])
    sp.set_num_threads(0)
    assert np.array_equal(results[0], results[1]) and np.array_equal(results[1], results[2])


def test_anova_tests():
    groups = [sp.rspdnorm(40, s * np.eye(3), np.eye(6), seed=10 + s) for s in (1, 2, 3)]
    assert sp.riem_anova(groups, stat="log_wilks", seed=1)["p_value"] <= 0.05
    assert sp.riem_anova(groups, stat="pillai", seed=1)["p_value"] <= 0.05
    f = sp.frechet_anova(groups, n_permutations=50, seed=1)
    assert f["f_stat"] >= 0
    assert 0 < f["p_permutation"] <= 1
    same = [groups[0], groups[0].copy()]
    assert sp.riem_anova(same, n_iterations=20)["p_value"] == 1.0


def test_singular_scatter():
    groups = [sp.rspdnorm(4, np.eye(6), np.eye(21), seed=s) for s in range(2)]
    with pytest.raises(sp.SingularScatterError, match="pca"):
        sp.riem_anova(groups)
    assert sp.riem_anova(groups, pca_dim=3, n_iterations=10)["dim"] == 3


def test_harmonization():
    sites = [sp.rspdnorm(30, np.eye(3), np.eye(6), seed=1), sp.rspdnorm(30, 1.5 * np.eye(3), np.eye(6), seed=2)]
    out = sp.combat_harmonization(sites)
    assert [o.shape for o in out] == [(30, 3, 3), (30, 3, 3)]
    rigid = sp.rigid_harmonization(sites)
    means = [sp.frechet_mean(r, lr=1.0, tol=1e-10, max_iter=200, line_search=True)["mean"] for r in rigid]
    assert np.abs(means[0] - means[1]).max() < 1e-6
    same = sp.combat_harmonization([sites[0], sites[0].copy()])
    assert np.abs(same[0] - sites[0]).max() < 1e-6


def test_cluster_metrics_match_sklearn():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n, k = rng.integers(6, 30), rng.integers(2, 5)
        labels = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
        x = rng.standard_normal((n, 3)) + labels[:, None]
        assert sp.silhouette_score(x, labels) == pytest.approx(silhouette_score(x, labels), abs=1e-10)
        assert sp.calinski_harabasz_score(x, labels) == pytest.approx(calinski_harabasz_score(x, labels), rel=1e-10)
        assert sp.davies_bouldin_score(x, labels) == pytest.approx(davies_bouldin_score(x, labels), rel=1e-10)


def test_non_spd_rejected():
    with pytest.raises(sp.DomainError):
        sp.frechet_mean(np.array([[[1.0, 2.0], [2.0, 1.0]]]))
