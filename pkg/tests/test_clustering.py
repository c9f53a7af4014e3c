"""Tests for mixture fitting, the enhancement objective and the pre-filter."""

import warnings

import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from opgd.clustering import (
    ClusterConfig,
    GmmModel,
    cluster_objective,
    enhance_gmm,
    fit_gmm_em,
    grad_cluster_objective,
    hard_labels,
    pca_prefilter,
    responsibilities,
)
from opgd.core import ConfigError
from opgd.evaluation import adjusted_rand_index
from opgd.optimizer import OptimConfig


def _three_blobs(seed=0, n_per=80, delta=5.0, p_extra=0):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [delta, 0.0], [0.0, delta]])
    X = np.vstack([rng.standard_normal((n_per, 2)) + c for c in centers])
    if p_extra:
        X = np.hstack([X, rng.standard_normal((3 * n_per, p_extra))])
    y = np.repeat([1, 2, 3], n_per)
    return X, y


def _random_gmm(rng, K, p):
    means = rng.normal(scale=3.0, size=(K, p))
    covs = np.empty((K, p, p))
    for k in range(K):
        A = rng.standard_normal((p, p))
        covs[k] = A @ A.T / p + np.eye(p)
    w = rng.uniform(1.0, 2.0, size=K)
    return GmmModel(weights=w / w.sum(), means=means, covariances=covs)


def _fd_gradient(fn, V, h=1e-6):
    G = np.zeros_like(V)
    for i in range(V.shape[0]):
        for j in range(V.shape[1]):
            Vp = V.copy()
            Vp[i, j] += h
            Vm = V.copy()
            Vm[i, j] -= h
            G[i, j] = (fn(Vp) - fn(Vm)) / (2 * h)
    return G


class TestClusterConfig:
    def test_defaults(self):
        cfg = ClusterConfig()
        assert cfg.lam is None and cfg.pca_threshold is None

    @pytest.mark.parametrize(
        "kw",
        [
            {"lam": -1.0},
            {"em_max_iters": 0},
            {"em_tol": 0.0},
            {"cov_floor": 0.0},
            {"pca_threshold": 0.0},
            {"pca_threshold": 1.5},
        ],
    )
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ConfigError):
            ClusterConfig(**kw)


class TestFitGmmEm:
    def test_recovers_separated_clusters(self):
        X, y = _three_blobs(0)
        gmm = fit_gmm_em(X, 3, ClusterConfig(seed=0))
        lab = hard_labels(X, gmm)
        assert adjusted_rand_index(lab, y) > 0.95
        np.testing.assert_allclose(gmm.weights.sum(), 1.0, atol=1e-12)

    def test_log_likelihood_trace_monotone(self):
        X, _ = _three_blobs(1)
        _, trace = fit_gmm_em(X, 3, ClusterConfig(seed=1), return_trace=True)
        assert np.all(np.diff(trace) >= -1e-8)

    def test_seed_determinism(self):
        X, _ = _three_blobs(2)
        g1 = fit_gmm_em(X, 3, ClusterConfig(seed=7))
        g2 = fit_gmm_em(X, 3, ClusterConfig(seed=7))
        np.testing.assert_array_equal(g1.means, g2.means)
        np.testing.assert_array_equal(g1.covariances, g2.covariances)

    def test_single_component_is_sample_moments(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((100, 3)) * [1.0, 2.0, 0.5]
        gmm = fit_gmm_em(X, 1, ClusterConfig(seed=0))
        np.testing.assert_allclose(gmm.means[0], X.mean(axis=0), atol=1e-8)
        D = X - X.mean(axis=0)
        np.testing.assert_allclose(gmm.covariances[0], D.T @ D / 100, atol=1e-6)

    def test_responsibility_rows_sum_to_one(self):
        X, _ = _three_blobs(4)
        gmm = fit_gmm_em(X, 3, ClusterConfig(seed=4))
        R = responsibilities(X, gmm)
        np.testing.assert_allclose(R.sum(axis=1), 1.0, atol=1e-12)


class TestClusterObjective:
    def test_matches_brute_force(self):
        """Objective recomputed from scratch with scipy densities."""
        rng = np.random.default_rng(5)
        X = rng.standard_normal((40, 4))
        gmm = _random_gmm(rng, 3, 4)
        V = rng.standard_normal((4, 2))
        lam = 40.0

        Z = X @ V
        joint = np.empty((40, 3))
        for k in range(3):
            pv = np.diag(V.T @ gmm.covariances[k] @ V)
            joint[:, k] = np.log(gmm.weights[k]) + multivariate_normal.logpdf(
                Z, mean=gmm.means[k] @ V, cov=np.diag(pv)
            )
        term1 = (joint.max(axis=1) - logsumexp(joint, axis=1)).sum()
        G = V.T @ V - np.eye(2)
        ref = term1 - lam * np.sum(G * G)
        np.testing.assert_allclose(
            cluster_objective(X, V, gmm, lam), ref, atol=1e-9
        )

    def test_objective_nonpositive_without_penalty_at_orthonormal(self):
        """max <= logsumexp entrywise, so the assignment term is <= 0;
        orthonormal V kills the penalty."""
        rng = np.random.default_rng(6)
        X = rng.standard_normal((30, 3))
        gmm = _random_gmm(rng, 2, 3)
        V = np.linalg.qr(rng.standard_normal((3, 2)))[0]
        assert cluster_objective(X, V, gmm, 30.0) <= 0.0

    def test_gradient_against_finite_differences(self):
        """Valid away from argmax boundaries; seeds checked to keep a
        clear top-component margin at every point."""
        rng = np.random.default_rng(7)
        X = rng.standard_normal((30, 4)) * 2.0
        gmm = _random_gmm(rng, 3, 4)
        V = rng.standard_normal((4, 2))
        lam = 3.0
        joint = np.log(gmm.weights)[None, :] + np.stack(
            [
                multivariate_normal.logpdf(
                    X @ V,
                    mean=gmm.means[k] @ V,
                    cov=np.diag(np.diag(V.T @ gmm.covariances[k] @ V)),
                )
                for k in range(3)
            ],
            axis=1,
        )
        top2 = np.sort(joint, axis=1)[:, -2:]
        assert np.all(top2[:, 1] - top2[:, 0] > 1e-3), "degenerate test case"
        G = grad_cluster_objective(X, V, gmm, lam)
        G_fd = _fd_gradient(lambda M: cluster_objective(X, M, gmm, lam), V)
        np.testing.assert_allclose(G, G_fd, rtol=1e-5, atol=1e-7)

    def test_penalty_gradient_alone(self):
        """With a flat assignment term (K = 1) only the penalty drives V."""
        rng = np.random.default_rng(8)
        X = rng.standard_normal((25, 3))
        gmm = _random_gmm(rng, 1, 3)
        V = rng.standard_normal((3, 2))
        lam = 5.0
        G = grad_cluster_objective(X, V, gmm, lam)
        ref = -4.0 * lam * V @ (V.T @ V - np.eye(2))
        np.testing.assert_allclose(G, ref, atol=1e-9)


class TestEnhanceGmm:
    def test_projection_near_orthonormal_and_labels_sensible(self):
        X, y = _three_blobs(9, p_extra=3)
        cc = ClusterConfig(seed=9)
        gmm = fit_gmm_em(X, 3, cc)
        V, lab, projected = enhance_gmm(X, gmm, 2, cc,
                                        OptimConfig(max_iters=150))
        assert V.shape == (5, 2)
        G = V.T @ V - np.eye(2)
        assert np.sum(G * G) <= 1e-2
        assert adjusted_rand_index(lab, y) > 0.9
        assert projected.means.shape == (3, 2)
        # re-estimated projected covariances are diagonal
        for C in projected.covariances:
            np.testing.assert_array_equal(C, np.diag(np.diag(C)))

    def test_objective_not_worse_than_start(self):
        X, _ = _three_blobs(10, p_extra=2)
        cc = ClusterConfig(seed=10)
        gmm = fit_gmm_em(X, 3, cc)
        lam = float(X.shape[0])
        V, _, _ = enhance_gmm(X, gmm, 2, cc, OptimConfig(max_iters=100))
        # compare against the orthonormalized warm start it was given
        from opgd.core import scatter_from_responsibilities
        from opgd.optimizer import init_projection

        R = responsibilities(X, gmm)
        V0 = np.linalg.qr(init_projection(
            scatter_from_responsibilities(X, R), 2, OptimConfig()))[0]
        assert cluster_objective(X, V, gmm, lam) >= \
            cluster_objective(X, V0, gmm, lam) - 1e-9

    def test_dim_validation(self):
        X, _ = _three_blobs(11)
        gmm = fit_gmm_em(X, 2, ClusterConfig(seed=11))
        with pytest.raises(ConfigError):
            enhance_gmm(X, gmm, 0)
        with pytest.raises(ConfigError):
            enhance_gmm(X, gmm, 3)


class TestPcaPrefilter:
    def test_drops_negligible_direction(self):
        rng = np.random.default_rng(12)
        base = rng.standard_normal((200, 3)) * [5.0, 2.0, 1.0]
        tiny = base[:, :1] * 1e-4 + rng.standard_normal((200, 1)) * 1e-6
        X = np.hstack([base, tiny])
        Xr, basis = pca_prefilter(X, 0.999)
        assert Xr.shape == (200, 3) and basis.shape == (4, 3)
        # retained columns reproduce the projection of centered data
        np.testing.assert_allclose(Xr, (X - X.mean(axis=0)) @ basis, atol=1e-10)

    def test_threshold_one_keeps_everything(self):
        rng = np.random.default_rng(13)
        X = rng.standard_normal((50, 4))
        Xr, basis = pca_prefilter(X, 1.0)
        assert Xr.shape == (50, 4)

    def test_descending_variance_order(self):
        rng = np.random.default_rng(14)
        X = rng.standard_normal((300, 4)) * [1.0, 4.0, 2.0, 0.1]
        Xr, _ = pca_prefilter(X, 1.0)
        v = Xr.var(axis=0)
        assert np.all(np.diff(v) <= 1e-12)

    def test_bad_threshold(self):
        with pytest.raises(ConfigError):
            pca_prefilter(np.eye(3), 0.0)

    def test_collinear_pair_reduced(self):
        """A 0.9999-correlated pair loses its difference direction."""
        rng = np.random.default_rng(15)
        z = rng.standard_normal(500) * 4.0
        X = np.column_stack([
            rng.standard_normal(500),
            z,
            z + rng.standard_normal(500) * 0.05,
        ])
        Xr, _ = pca_prefilter(X, 0.999)
        assert Xr.shape[1] == 2
