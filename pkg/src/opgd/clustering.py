"""Cluster-enhancement by projection: penalized max-component objective.

Given a fitted Gaussian mixture, the projection ``V`` is chosen to
maximize

    sum_i log( max_l w_l phi_l(V'x_i) / sum_l w_l phi_l(V'x_i) )
        - lambda * ||V'V - I||_F^2,

the sharpest-assignment analogue of the supervised likelihood, with a
Frobenius penalty keeping ``V`` near orthonormality (default weight
``lambda = n``). ``phi_l`` are the projected diagonal-covariance
component densities. After the ascent the mixture is re-estimated
inside the subspace by diagonal-covariance EM and points are labeled by
their maximum responsibility.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .classifier import _diag_log_densities
from .core import ConfigError, DataError, check_projection, \
    scatter_from_responsibilities, \
    symmetrize
from .objective import _grad_weighted_logdens, _weighted_scatter, \
    log_densities, projected_variances
from .optimizer import OptimConfig, ascend, init_projection


@dataclass(frozen=True)
class GmmModel:
    """Gaussian mixture parameters (weights on the simplex, full PD
    covariances after the estimation floor)."""

    weights: np.ndarray       # (K,)
    means: np.ndarray         # (K, p)
    covariances: np.ndarray   # (K, p, p)

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def p(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class ClusterConfig:
    """Settings for mixture fitting and enhancement.

    ``lam`` is the orthonormality penalty weight; ``None`` means the
    number of observations. ``pca_threshold`` enables the collinearity
    pre-filter when set (0.999 is the conventional choice).
    """

    lam: float | None = None
    em_max_iters: int = 300
    em_tol: float = 1e-8
    cov_floor: float = 1e-6
    seed: int = 0
    pca_threshold: float | None = None

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise ConfigError("lam must be non-negative")
        if self.em_max_iters < 1 or self.em_tol <= 0 or self.cov_floor <= 0:
            raise ConfigError("EM settings must be positive")
        if self.pca_threshold is not None and not 0 < self.pca_threshold <= 1:
            raise ConfigError("pca_threshold must lie in (0, 1]")


def _floor_covariance(S, floor):
    """Clamp eigenvalues from below; untouched when already above floor."""
    S = symmetrize(S)
    w, U = np.linalg.eigh(S)
    if w[0] >= floor:
        return S
    w = np.maximum(w, floor)
    return symmetrize((U * w) @ U.T)


def _kmeans(X, K, rng, iters: int = 100):
    """Plain Lloyd iterations with distance-weighted seeding."""
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    for k in range(1, K):
        d2 = np.min(((X[:, None, :] - centers[None, :k, :]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        if total <= 0:
            centers[k] = X[rng.integers(n)]
        else:
            centers[k] = X[rng.choice(n, p=d2 / total)]
    assign = np.full(n, -1, dtype=int)
    for _ in range(iters):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        new = np.argmin(d2, axis=1)
        if np.array_equal(new, assign):
            break
        assign = new
        for k in range(K):
            pts = X[assign == k]
            if len(pts):
                centers[k] = pts.mean(axis=0)
    return assign


def fit_gmm_em(X, K: int, config: ClusterConfig | None = None,
               return_trace: bool = False):
    """Full-covariance Gaussian mixture by EM.

    Initialization is k-means from the config seed; each M-step clamps
    covariance eigenvalues at ``cov_floor * trace/p``; a component whose
    responsibility mass vanishes is re-seeded at the point the current
    mixture explains worst, with a warning. The log-likelihood trace is
    non-decreasing (within 1e-8) whenever no floor or re-seed fires.
    """
    config = config if config is not None else ClusterConfig()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DataError("X must be a 2-d array")
    n, p = X.shape
    if n < K:
        raise DataError(f"need at least K={K} observations, got {n}")
    rng = np.random.default_rng(config.seed)
    data_cov_trace = float(np.var(X, axis=0).sum())

    assign = _kmeans(X, K, rng)
    R = np.zeros((n, K))
    R[np.arange(n), assign] = 1.0

    weights = np.empty(K)
    means = np.empty((K, p))
    covs = np.empty((K, p, p))
    trace = []
    ll_prev = -np.inf
    ll_per_point = None
    for it in range(config.em_max_iters + 1):
        # M-step
        mass = R.sum(axis=0)
        for k in range(K):
            if mass[k] < 1e-10:
                # dead component: restart at the worst-explained point
                warnings.warn(f"mixture component {k + 1} lost all "
                              "responsibility mass; re-seeding")
                worst = int(np.argmin(ll_per_point)) \
                    if ll_per_point is not None else int(rng.integers(n))
                means[k] = X[worst]
                covs[k] = _floor_covariance(
                    np.diag(np.full(p, max(data_cov_trace / p, 1e-12))),
                    config.cov_floor * max(data_cov_trace, 1e-12) / p)
                weights[k] = 1.0 / n
                continue
            means[k] = R[:, k] @ X / mass[k]
            D = X - means[k]
            S = (D * R[:, k, None]).T @ D / mass[k]
            floor = config.cov_floor * max(np.trace(S),
                                           1e-6 * data_cov_trace) / p
            covs[k] = _floor_covariance(S, floor)
            weights[k] = mass[k] / n
        weights = weights / weights.sum()
        # E-step
        ld = _full_mixture_log_densities(X, means, covs)
        joint = np.log(weights)[None, :] + ld
        ll_per_point = logsumexp(joint, axis=1)
        ll = float(ll_per_point.sum())
        trace.append(ll)
        R = np.exp(joint - ll_per_point[:, None])
        if it > 0 and ll - ll_prev <= config.em_tol * max(1.0, abs(ll)):
            break
        ll_prev = ll
    model = GmmModel(weights=weights.copy(), means=means.copy(),
                     covariances=covs.copy())
    if return_trace:
        return model, np.asarray(trace)
    return model


def _full_mixture_log_densities(X, means, covs):
    from scipy.linalg import cho_factor, cho_solve

    n, p = X.shape
    out = np.empty((n, means.shape[0]))
    for k in range(means.shape[0]):
        chol = cho_factor(symmetrize(covs[k]), lower=True)
        logdet = 2.0 * np.log(np.diag(chol[0])).sum()
        D = X - means[k]
        quad = np.einsum("ij,ji->i", D, cho_solve(chol, D.T))
        out[:, k] = -0.5 * (p * np.log(2 * np.pi) + logdet + quad)
    return out


def responsibilities(X, gmm: GmmModel):
    """Posterior component probabilities of each observation."""
    joint = np.log(gmm.weights)[None, :] + \
        _full_mixture_log_densities(np.asarray(X, dtype=float),
                                    gmm.means, gmm.covariances)
    return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))


def hard_labels(X, gmm: GmmModel):
    """Maximum-responsibility component ids, 1-based."""
    return np.argmax(responsibilities(X, gmm), axis=1) + 1


def _penalty(V):
    G = V.T @ V - np.eye(V.shape[1])
    return float(np.sum(G * G))


def cluster_objective(X, V, gmm: GmmModel, lam: float) -> float:
    """Max-component log-posterior sum minus the orthonormality penalty."""
    X = np.asarray(X, dtype=float)
    V = check_projection(V, gmm.p)
    joint = np.log(gmm.weights)[None, :] + \
        log_densities(X, V, gmm.means, gmm.covariances)
    term1 = float((joint.max(axis=1) - logsumexp(joint, axis=1)).sum())
    return term1 - lam * _penalty(V)


def grad_cluster_objective(X, V, gmm: GmmModel, lam: float):
    """Gradient of :func:`cluster_objective`.

    The per-point argmax components are recomputed here (ties to the
    lowest index) and treated as locally constant, which is valid away
    from assignment boundaries; the mixture-denominator part is the
    same posterior-weighted form as the supervised gradient, and the
    penalty contributes ``-4 lam V (V'V - I)``.
    """
    X = np.asarray(X, dtype=float)
    V = check_projection(V, gmm.p)
    joint = np.log(gmm.weights)[None, :] + \
        log_densities(X, V, gmm.means, gmm.covariances)
    post = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
    hard = np.zeros_like(post)
    hard[np.arange(X.shape[0]), np.argmax(joint, axis=1)] = 1.0
    pv = projected_variances(V, gmm.covariances)
    g_num = _grad_weighted_logdens(
        V, gmm.covariances, pv,
        _weighted_scatter(X, gmm.means, hard), hard.sum(axis=0))
    g_den = _grad_weighted_logdens(
        V, gmm.covariances, pv,
        _weighted_scatter(X, gmm.means, post), post.sum(axis=0))
    return g_num - g_den - 4.0 * lam * V @ (V.T @ V - np.eye(V.shape[1]))


def _diag_em(Z, weights, means, variances, config: ClusterConfig):
    """Diagonal-covariance EM in the projected space, warm-started."""
    n, d = Z.shape
    K = weights.shape[0]
    floor = config.cov_floor * max(float(np.var(Z, axis=0).mean()), 1e-12)
    variances = np.maximum(variances, floor)
    ll_prev = -np.inf
    trace = []
    for it in range(config.em_max_iters + 1):
        joint = np.log(weights)[None, :] + \
            _diag_log_densities(Z, means, variances)
        ll_per_point = logsumexp(joint, axis=1)
        ll = float(ll_per_point.sum())
        trace.append(ll)
        R = np.exp(joint - ll_per_point[:, None])
        if it > 0 and ll - ll_prev <= config.em_tol * max(1.0, abs(ll)):
            break
        ll_prev = ll
        mass = R.sum(axis=0)
        for k in range(K):
            if mass[k] < 1e-10:
                warnings.warn(f"projected component {k + 1} lost all "
                              "responsibility mass; re-seeding")
                worst = int(np.argmin(ll_per_point))
                means[k] = Z[worst]
                variances[k] = np.maximum(np.var(Z, axis=0), floor)
                weights[k] = 1.0 / n
                continue
            means[k] = R[:, k] @ Z / mass[k]
            D = Z - means[k]
            variances[k] = np.maximum((R[:, k] @ (D * D)) / mass[k], floor)
            weights[k] = mass[k] / n
        weights = weights / weights.sum()
    return weights, means, variances, R, np.asarray(trace)


def enhance_gmm(X, gmm: GmmModel, dim: int, config: ClusterConfig | None = None,
                opt: OptimConfig | None = None):
    """Sharpen a fitted mixture by projecting, then re-estimating.

    Pipeline: warm-start ``V`` from the responsibility-weighted scatter
    of the initial mixture (orthonormalized), ascend the penalized
    max-component objective, then run diagonal-covariance EM on ``X V``
    initialized from the projected mixture parameters. Returns the
    projection, the 1-based maximum-responsibility labels, and the
    re-estimated projected mixture (diagonal covariances).
    """
    config = config if config is not None else ClusterConfig()
    opt = opt if opt is not None else OptimConfig()
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= dim <= gmm.p:
        raise ConfigError(f"dim must lie in [1, {gmm.p}], got {dim}")
    lam = float(config.lam) if config.lam is not None else float(n)

    R = responsibilities(X, gmm)
    scatter = scatter_from_responsibilities(X, R)
    V0 = init_projection(scatter, dim, opt)
    V0 = np.linalg.qr(V0)[0]

    V, _ = ascend(lambda M: cluster_objective(X, M, gmm, lam),
                  lambda M: grad_cluster_objective(X, M, gmm, lam),
                  V0, opt, scale=float(n))

    Z = X @ V
    weights, means, variances, resp, _ = _diag_em(
        Z, gmm.weights.copy(), gmm.means @ V,
        projected_variances(V, gmm.covariances), config)
    labels = np.argmax(resp, axis=1) + 1
    covs = np.stack([np.diag(v) for v in variances])
    projected = GmmModel(weights=weights, means=means, covariances=covs)
    return V, labels, projected


def pca_prefilter(X, threshold: float):
    """Drop trailing principal components beyond a variance-ratio target.

    Keeps the smallest leading set of principal components whose
    cumulative share of the total variance reaches ``threshold`` and
    returns the centered projected data together with the component
    basis (columns, for back-mapping).
    """
    if not 0 < threshold <= 1:
        raise ConfigError("threshold must lie in (0, 1]")
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    w, U = np.linalg.eigh(symmetrize(Xc.T @ Xc / X.shape[0]))
    w, U = w[::-1], U[:, ::-1]
    total = w.sum()
    if total <= 0:
        return Xc[:, :0].copy(), U[:, :0]
    ratio = np.cumsum(w) / total
    ratio[-1] = 1.0
    m = int(np.searchsorted(ratio, threshold) + 1)
    basis = U[:, :m]
    return Xc @ basis, basis
