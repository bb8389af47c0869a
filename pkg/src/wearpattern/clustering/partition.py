"""Partition engines: k-means, k-shape and kernel k-means."""
from __future__ import annotations

import numpy as np

from ..distance import median_gamma, rbf_gram, sbd_pairwise, sq_euclidean_matrix, znormalize
from ..errors import ParameterError, PreprocessingError
from .model import Algorithm, ClusterModel, compact_labels


def _check_k(X, k):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ParameterError("corpus must be a non-empty 2-D matrix")
    if not 1 <= k <= X.shape[0]:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={X.shape[0]}")
    return X


def _plusplus(rng, d2_to, n, k):
    """D^2 seeding. ``d2_to(i)`` returns squared distances of all points to point ``i``."""
    chosen = [int(rng.integers(n))]
    closest = d2_to(chosen[0]).copy()
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:  # every point coincides with a chosen seed
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        np.minimum(closest, d2_to(nxt), out=closest)
    return chosen


def _finalize(algorithm, raw, k, params, seed, history, prototypes=None, extra=None):
    labels, order = compact_labels(raw)
    if prototypes is not None:
        prototypes = prototypes[order]
    return ClusterModel(algorithm, labels, len(order), params, prototypes, seed, history, extra or {})


def _lloyd(X, centroids, max_iter):
    history = []
    labels = None
    for _ in range(max_iter):
        d2 = sq_euclidean_matrix(X, centroids)
        new = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(X)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(len(centroids)):
            members = labels == c
            if members.any():
                centroids[c] = X[members].mean(axis=0)
            else:
                # empty cluster: reseed at the point farthest from its centroid
                far = int(d2[np.arange(len(X)), labels].argmax())
                centroids[c] = X[far]
                labels[far] = c
                d2[far] = 0.0
    return labels, centroids, history


def kmeans_fit(X, k: int, seed: int = 0, max_iter: int = 300, n_init: int = 10) -> ClusterModel:
    """Lloyd iterations from k-means++ seeding; best of ``n_init`` restarts by WCSS."""
    X = _check_k(X, k)
    rng = np.random.default_rng(seed)
    n = len(X)
    best = None
    for _ in range(n_init):
        seeds = _plusplus(rng, lambda i: sq_euclidean_matrix(X, X[i:i + 1])[:, 0], n, k)
        labels, centroids, history = _lloyd(X, X[seeds].copy(), max_iter)
        if best is None or history[-1] < best[2][-1]:
            best = (labels, centroids, history)
    labels, centroids, history = best
    params = {"k": k, "max_iter": max_iter, "n_init": n_init}
    return _finalize(Algorithm.KMEANS, labels, k, params, seed, history, centroids)


def _shape_extraction(members, centroid):
    """Centroid of z-normalized ``members`` after aligning each to ``centroid``."""
    if np.any(centroid):
        _, shift = sbd_pairwise(centroid[None], members)
        aligned = np.stack([np.roll(m, -s) for m, s in zip(members, shift[0])])
    else:
        aligned = members
    L = members.shape[1]
    S = aligned.T @ aligned
    Q = np.eye(L) - 1.0 / L
    _, vecs = np.linalg.eigh(Q @ S @ Q)
    c = vecs[:, -1]
    if np.sum((aligned - c) ** 2) > np.sum((aligned + c) ** 2):
        c = -c
    return znormalize(c)[0]


def kshape_fit(X, k: int, seed: int = 0, max_iter: int = 100, n_init: int = 10) -> ClusterModel:
    """k-shape: SBD assignment alternating with shape-extraction centroids.

    Seeds are picked by D^2 sampling under SBD; the restart with the lowest
    sum of squared SBD wins.
    """
    X = _check_k(X, k)
    Z = znormalize(X)
    constant = np.flatnonzero(~Z.any(axis=1))
    if constant.size:
        raise PreprocessingError(f"constant series cannot be z-normalized: rows {constant.tolist()}")
    n = len(Z)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        seeds = _plusplus(rng, lambda i: sbd_pairwise(Z, Z[i:i + 1])[0][:, 0] ** 2, n, k)
        centroids = Z[seeds].copy()
        labels = None
        history = []
        for _ in range(max_iter):
            dist, _ = sbd_pairwise(Z, centroids)
            new = dist.argmin(axis=1)
            history.append(float((dist[np.arange(n), new] ** 2).sum()))
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            for c in range(k):
                members = labels == c
                if not members.any():
                    far = int(dist[np.arange(n), labels].argmax())
                    labels[far] = c
                    dist[far] = 0.0
                    members = labels == c
                centroids[c] = _shape_extraction(Z[members], centroids[c])
        if best is None or history[-1] < best[2][-1]:
            best = (labels, centroids, history)
    labels, centroids, history = best
    params = {"k": k, "max_iter": max_iter, "n_init": n_init}
    return _finalize(Algorithm.KSHAPE, labels, k, params, seed, history, centroids)


def kernel_distances(K, labels, k):
    """Squared feature-space distance of every point to every cluster mean."""
    n = len(K)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    sizes = onehot.sum(axis=0)
    safe = np.where(sizes > 0, sizes, 1.0)
    cross = K @ onehot / safe
    within = np.einsum("ic,ij,jc->c", onehot, K, onehot) / safe ** 2
    d = np.diag(K)[:, None] - 2.0 * cross + within[None, :]
    d[:, sizes == 0] = np.inf
    return np.maximum(d, 0.0)


def kernel_objective(K, labels, k) -> float:
    d = kernel_distances(K, labels, k)
    return float(d[np.arange(len(K)), labels].sum())


def kernel_kmeans_fit(X, k: int, gamma: float | None = None, seed: int = 0, max_iter: int = 300,
                      n_init: int = 10, kernel: str = "rbf") -> ClusterModel:
    """Lloyd updates in the feature space of an RBF (or linear) Gram matrix.

    ``gamma`` defaults to the inverse median squared pairwise distance.
    ``kernel="linear"`` uses the plain inner product, which makes the fit
    equivalent to Euclidean k-means.
    """
    X = _check_k(X, k)
    if kernel == "rbf":
        if gamma is None:
            gamma = median_gamma(X)
        if not gamma > 0:
            raise ParameterError(f"gamma must be positive, got {gamma}")
        K = rbf_gram(X, gamma)
    elif kernel == "linear":
        K = X @ X.T
    else:
        raise ParameterError(f"unknown kernel {kernel!r}")
    n = len(X)
    diag = np.diag(K)
    feat_d2 = lambda i: np.maximum(diag + K[i, i] - 2.0 * K[:, i], 0.0)  # noqa: E731
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        seeds = _plusplus(rng, feat_d2, n, k)
        labels = np.stack([feat_d2(s) for s in seeds], axis=1).argmin(axis=1)
        labels[seeds] = np.arange(k)
        history = []
        for _ in range(max_iter):
            d = kernel_distances(K, labels, k)
            history.append(float(d[np.arange(n), labels].sum()))
            new = d.argmin(axis=1)
            # keep current label on ties so the objective cannot oscillate
            keep = d[np.arange(n), labels] <= d[np.arange(n), new]
            new[keep] = labels[keep]
            for c in range(k):
                if not (new == c).any():
                    dn = d[np.arange(n), new]
                    far = int(dn.argmax())
                    new[far] = c
            if np.array_equal(new, labels):
                break
            labels = new
        if best is None or history[-1] < best[2][-1]:
            best = (labels, None, history)
    labels, _, history = best
    params = {"k": k, "gamma": gamma, "kernel": kernel, "max_iter": max_iter, "n_init": n_init}
    return _finalize(Algorithm.KERNEL_KMEANS, labels, k, params, seed, history)
