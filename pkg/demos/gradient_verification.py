"""Finite-difference verification of both analytic gradients.

The supervised objective (classification log likelihood over the
projection) and the clustering objective (max-component assignment term
minus the orthonormality penalty) each come with a hand-derived
gradient; this script checks both against central differences on random
instances and prints the worst relative error seen.

    python3 demos/gradient_verification.py
"""

import numpy as np

from opgd import (
    Dataset,
    GmmModel,
    classification_log_likelihood,
    cluster_objective,
    estimate_class_model,
    grad_cluster_objective,
    grad_objective,
    log_densities,
)


def central_diff(fn, V, h=1e-6):
    G = np.zeros_like(V)
    for i in range(V.shape[0]):
        for j in range(V.shape[1]):
            Vp = V.copy(); Vp[i, j] += h
            Vm = V.copy(); Vm[i, j] -= h
            G[i, j] = (fn(Vp) - fn(Vm)) / (2 * h)
    return G


def rel_err(G, FD):
    return float(np.linalg.norm(G - FD) / max(1.0, np.linalg.norm(FD)))


# --- supervised objective ----------------------------------------------

worst = 0.0
for seed in range(30):
    rng = np.random.default_rng(seed)
    n, p, K = int(rng.integers(15, 50)), int(rng.integers(2, 8)), int(rng.integers(2, 5))
    dim = int(rng.integers(1, min(4, p) + 1))
    X = rng.standard_normal((n, p))
    y = rng.integers(1, K + 1, size=n)
    y[: 2 * K] = np.repeat(np.arange(1, K + 1), 2)
    ds = Dataset(X=X, labels=y)
    model = estimate_class_model(ds)
    V = rng.standard_normal((p, dim))
    err = rel_err(grad_objective(ds, V, model),
                  central_diff(lambda W: classification_log_likelihood(ds, W, model), V))
    worst = max(worst, err)
print(f"supervised gradient, 30 random instances: max rel err {worst:.2e}")

# --- clustering objective ----------------------------------------------

worst = 0.0
checked = 0
for seed in range(60):
    rng = np.random.default_rng(1000 + seed)
    n, p, K = 30, 4, 3
    X = rng.standard_normal((n, p)) * 2.0
    means = rng.normal(scale=3.0, size=(K, p))
    covs = np.empty((K, p, p))
    for k in range(K):
        A = rng.standard_normal((p, p))
        covs[k] = A @ A.T / p + np.eye(p)
    w = rng.uniform(1, 2, size=K)
    gmm = GmmModel(weights=w / w.sum(), means=means, covariances=covs)
    V = rng.standard_normal((p, 2))
    lam = 5.0

    # the assignment term is only differentiable away from argmax ties,
    # so skip instances where some point sits near a tie boundary
    joint = np.log(gmm.weights) + log_densities(X, V, means, covs)
    top2 = np.sort(joint, axis=1)[:, -2:]
    if np.min(top2[:, 1] - top2[:, 0]) < 1e-3:
        continue
    checked += 1
    err = rel_err(grad_cluster_objective(X, V, gmm, lam),
                  central_diff(lambda W: cluster_objective(X, W, gmm, lam), V))
    worst = max(worst, err)
print(f"clustering gradient, {checked} usable instances: max rel err {worst:.2e}")

# the command-line entry point runs the same suites: `opgd gradcheck`
