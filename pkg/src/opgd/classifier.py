"""End-to-end projected Gaussian classifier and the reference baselines.

``fit_opgd`` runs the full pipeline: estimate class moments, warm-start
the projection, ascend the classification log-likelihood, normalize and
greedily order the columns, then freeze the projected parameters. The
baselines are reduced-rank LDA, SAVE (sliced average variance
estimation) with a quadratic-discriminant read-out, and RDA
(regularized discriminant analysis) blending per-class and pooled
covariances.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import ConfigError, Dataset, GaussianClassModel, ScatterMatrices, \
    check_projection, compute_scatter, diag_congruence, estimate_class_model, \
    sphere, symmetrize
from .objective import ClampStats, LOG_2PI, projected_variances
from .optimizer import OptimConfig, _normalize_columns, discriminant_directions, \
    init_projection, maximize, order_columns


def _default_names(K: int) -> tuple[str, ...]:
    return tuple(str(k) for k in range(1, K + 1))


def _as_matrix(X, p: int):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != p:
        raise ValueError(f"expected points with {p} coordinates, got {X.shape}")
    return X


def _diag_log_densities(Z, means, variances):
    """Diagonal-Gaussian log-densities: rows are points, columns classes."""
    diff = Z[:, None, :] - means[None, :, :]
    quad = np.einsum("ikj,kj->ik", diff * diff, 1.0 / variances)
    const = -0.5 * Z.shape[1] * LOG_2PI - 0.5 * np.log(variances).sum(axis=1)
    return const[None, :] - 0.5 * quad


def _full_log_densities(Z, means, covariances):
    """Full-covariance Gaussian log-densities via Cholesky solves.

    A class covariance that fails to factor gets a ridge of
    1e-8 * trace/p on the diagonal, with a warning.
    """
    from scipy.linalg import cho_factor, cho_solve

    n, d = Z.shape
    K = means.shape[0]
    out = np.empty((n, K))
    for k in range(K):
        S = symmetrize(covariances[k])
        try:
            chol = cho_factor(S, lower=True)
        except np.linalg.LinAlgError:
            ridge = 1e-8 * max(np.trace(S), 1.0) / d
            warnings.warn("singular covariance; adding ridge "
                          f"{ridge:.3e} to keep the discriminant defined")
            chol = cho_factor(S + ridge * np.eye(d), lower=True)
        logdet = 2.0 * np.log(np.diag(chol[0])).sum()
        D = Z - means[k]
        quad = np.einsum("ij,ji->i", D, cho_solve(chol, D.T))
        out[:, k] = -0.5 * (d * LOG_2PI + logdet + quad)
    return out


def _posterior_predict(log_dens, priors):
    logpost = np.log(priors)[None, :] + log_dens
    post = np.exp(logpost - logsumexp(logpost, axis=1, keepdims=True))
    return np.argmax(post, axis=1) + 1, post


@dataclass(frozen=True)
class FitDiagnostics:
    iterations: int
    final_objective: float
    clamp_count: int
    trace: np.ndarray


@dataclass(frozen=True)
class OpgdModel:
    """Fitted projection classifier.

    ``projected_means[k] = V' mu_k`` and ``projected_vars[k, j] =
    v_j' Sigma_k v_j`` for the stored (ordered, unit-column) projection
    and the training moments, so consistency is re-checkable against a
    re-estimate of the training data.
    """

    projection: np.ndarray        # (p, p')
    projected_means: np.ndarray   # (K, p')
    projected_vars: np.ndarray    # (K, p')
    priors: np.ndarray            # (K,)
    label_names: tuple[str, ...]
    diagnostics: FitDiagnostics | None = None

    @property
    def p(self) -> int:
        return self.projection.shape[0]

    @property
    def dim(self) -> int:
        return self.projection.shape[1]

    @property
    def K(self) -> int:
        return self.priors.shape[0]


def fit_opgd(train: Dataset, dim: int, config: OptimConfig | None = None,
             V0=None, label_names=None) -> OpgdModel:
    """Fit the projected Gaussian classifier.

    Pipeline: class-moment estimation, warm start (skipped when ``V0``
    is supplied), monotone gradient ascent, unit-norm column rescaling
    (the objective is invariant to positive column scaling), greedy
    likelihood ordering of the columns, parameter freeze.
    """
    config = config if config is not None else OptimConfig()
    model = estimate_class_model(train)
    if not 1 <= dim <= model.p:
        raise ConfigError(f"dim must lie in [1, {model.p}], got {dim}")
    clamp = ClampStats()
    if V0 is None:
        scatter = compute_scatter(train, model)
        V0 = init_projection(scatter, dim, config)
    else:
        V0 = check_projection(V0, model.p)
        if V0.shape[1] != dim:
            raise ConfigError("V0 column count does not match dim")
    V, trace = maximize(train, model, V0, config, clamp)
    V = _normalize_columns(V)
    V = order_columns(train, V, model)
    names = tuple(label_names) if label_names is not None \
        else _default_names(model.K)
    if len(names) != model.K:
        raise ConfigError("label_names length does not match class count")
    return OpgdModel(
        projection=V,
        projected_means=model.means @ V,
        projected_vars=projected_variances(V, model.covariances, clamp),
        priors=model.priors,
        label_names=names,
        diagnostics=FitDiagnostics(iterations=len(trace) - 1,
                                   final_objective=float(trace[-1]),
                                   clamp_count=clamp.count,
                                   trace=trace),
    )


def predict(model: OpgdModel, X):
    """Class ids (1..K) and posterior matrix for new points.

    Ties in the posterior argmax go to the lowest class index.
    """
    X = _as_matrix(X, model.p)
    ld = _diag_log_densities(X @ model.projection, model.projected_means,
                             model.projected_vars)
    return _posterior_predict(ld, model.priors)


# ---------------------------------------------------------------------------
# Reduced-rank LDA

def lda_features(scatter: ScatterMatrices, r: int, n_classes: int | None = None,
                 ridge_frac: float = 1e-6):
    """Leading-``r`` discriminant directions of (W^-1)B, unit columns.

    The inverse is ridge-stabilized exactly as in the warm start. When
    ``n_classes`` is given, ``r`` beyond ``n_classes - 1`` is rejected
    (the between-class scatter has at most that rank). Near-zero leading
    eigenvalue draws a non-informative warning.
    """
    if r < 1:
        raise ConfigError("r must be at least 1")
    if n_classes is not None and r > n_classes - 1:
        raise ConfigError(f"r must be at most K-1 = {n_classes - 1}, got {r}")
    V, evals = discriminant_directions(scatter, r, ridge_frac)
    if evals[0] <= 1e-12:
        warnings.warn("between-class scatter is numerically zero; "
                      "discriminant features are non-informative")
    return V


@dataclass(frozen=True)
class LdaModel:
    projection: np.ndarray       # (p, r)
    means: np.ndarray            # (K, r) projected class means
    covariance: np.ndarray       # (r, r) projected pooled covariance
    priors: np.ndarray
    label_names: tuple[str, ...]

    @property
    def p(self) -> int:
        return self.projection.shape[0]


def lda_fit(train: Dataset, r: int, ridge_frac: float = 1e-6,
            label_names=None) -> LdaModel:
    """Reduced-rank LDA: project onto ``r`` discriminant directions and
    classify with the shared pooled covariance there."""
    model = estimate_class_model(train)
    scatter = compute_scatter(train, model)
    V = lda_features(scatter, r, n_classes=model.K, ridge_frac=ridge_frac)
    names = tuple(label_names) if label_names is not None \
        else _default_names(model.K)
    return LdaModel(projection=V,
                    means=model.means @ V,
                    covariance=symmetrize(V.T @ scatter.within @ V),
                    priors=model.priors,
                    label_names=names)


def lda_predict(model: LdaModel, X):
    X = _as_matrix(X, model.p)
    Z = X @ model.projection
    ld = _full_log_densities(Z, model.means,
                             np.broadcast_to(model.covariance,
                                             (model.means.shape[0],) +
                                             model.covariance.shape))
    return _posterior_predict(ld, model.priors)


# ---------------------------------------------------------------------------
# SAVE

def save_features(dataset: Dataset, r: int):
    """Sliced average variance estimation directions.

    Sphere the data, form ``M = sum_k prior_k (I - Sigma_k)^2`` from the
    sphered class covariances, take the top-``r`` eigenvectors, and map
    them back through the sphering transform. Raises a collinearity
    error when the total covariance is singular.
    """
    if not 1 <= r <= dataset.p:
        raise ConfigError(f"r must lie in [1, {dataset.p}], got {r}")
    sphered, T = sphere(dataset)
    model = estimate_class_model(sphered)
    eye = np.eye(dataset.p)
    M = np.zeros((dataset.p, dataset.p))
    for k in range(model.K):
        D = eye - model.covariances[k]
        M += model.priors[k] * (D @ D)
    M = symmetrize(M)
    evals, evecs = np.linalg.eigh(M)
    if evals[-1] <= 1e-12:
        warnings.warn("all sphered class covariances are the identity; "
                      "SAVE directions are non-informative")
    U = evecs[:, ::-1][:, :r]
    return _normalize_columns(T @ U)


@dataclass(frozen=True)
class SaveModel:
    projection: np.ndarray       # (p, r)
    means: np.ndarray            # (K, r)
    covariances: np.ndarray      # (K, r, r) full, in the projected space
    priors: np.ndarray
    label_names: tuple[str, ...]

    @property
    def p(self) -> int:
        return self.projection.shape[0]


def save_fit(train: Dataset, r: int, label_names=None) -> SaveModel:
    """SAVE features plus a quadratic Gaussian read-out in the subspace."""
    V = save_features(train, r)
    proj = Dataset(train.X @ V, train.labels)
    model = estimate_class_model(proj)
    names = tuple(label_names) if label_names is not None \
        else _default_names(model.K)
    return SaveModel(projection=V, means=model.means,
                     covariances=model.covariances, priors=model.priors,
                     label_names=names)


def save_predict(model: SaveModel, X):
    X = _as_matrix(X, model.p)
    ld = _full_log_densities(X @ model.projection, model.means,
                             model.covariances)
    return _posterior_predict(ld, model.priors)


# ---------------------------------------------------------------------------
# RDA

@dataclass(frozen=True)
class RdaModel:
    alpha: float
    means: np.ndarray            # (K, p)
    covariances: np.ndarray      # (K, p, p) blended
    priors: np.ndarray
    label_names: tuple[str, ...]

    @property
    def p(self) -> int:
        return self.means.shape[1]


def rda_fit(train: Dataset, alpha: float, label_names=None) -> RdaModel:
    """Gaussian discriminant with covariances alpha*Sigma_k + (1-alpha)*W.

    alpha = 1 is quadratic discriminant analysis; alpha = 0 shares the
    pooled within-class covariance across classes (linear boundaries).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    model = estimate_class_model(train)
    scatter = compute_scatter(train, model)
    blended = alpha * model.covariances + (1.0 - alpha) * scatter.within
    names = tuple(label_names) if label_names is not None \
        else _default_names(model.K)
    return RdaModel(alpha=float(alpha), means=model.means, covariances=blended,
                    priors=model.priors, label_names=names)


def rda_predict(model: RdaModel, X):
    X = _as_matrix(X, model.p)
    ld = _full_log_densities(X, model.means, model.covariances)
    return _posterior_predict(ld, model.priors)


def rda_alpha_grid(p: int):
    """Blend grid {0, 1/(p-1), ..., 1}; two endpoints when p < 2."""
    return np.linspace(0.0, 1.0, max(int(p), 2))
