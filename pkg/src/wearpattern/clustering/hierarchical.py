from __future__ import annotations

import numpy as np

from ..distance import sq_euclidean_matrix
from ..errors import ParameterError
from .model import Algorithm, ClusterModel, compact_labels


def ward_linkage(X) -> np.ndarray:
    """Agglomerative Ward merges via the Lance-Williams recurrence.

    Returns a scipy-style linkage matrix ``(n-1, 4)``: merged ids, merge
    height and new cluster size. Heights are Ward distances
    ``sqrt(2 n_a n_b / (n_a + n_b)) * |c_a - c_b|``, i.e. twice the variance
    increase under a square root. Ties go to the lowest index pair.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    d2 = sq_euclidean_matrix(X)
    np.fill_diagonal(d2, np.inf)
    size = np.ones(n)
    ids = np.arange(n)
    alive = np.ones(n, dtype=bool)
    Z = np.empty((max(n - 1, 0), 4))
    for step in range(n - 1):
        flat = int(np.argmin(d2))
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        h2 = d2[i, j]
        ni, nj = size[i], size[j]
        Z[step] = [min(ids[i], ids[j]), max(ids[i], ids[j]), np.sqrt(h2), ni + nj]
        nk = size
        new = ((ni + nk) * d2[i] + (nj + nk) * d2[j] - nk * h2) / (ni + nj + nk)
        new[~alive] = np.inf
        d2[i] = new
        d2[:, i] = new
        d2[i, i] = np.inf
        d2[j] = np.inf
        d2[:, j] = np.inf
        alive[j] = False
        size[i] = ni + nj
        ids[i] = n + step
    return Z


def cut_tree(Z, n: int, k: int) -> np.ndarray:
    """Flat labels after the first ``n - k`` merges."""
    parent = list(range(2 * n - 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for step in range(n - k):
        a, b = int(Z[step, 0]), int(Z[step, 1])
        parent[find(a)] = n + step
        parent[find(b)] = n + step
    return np.array([find(i) for i in range(n)])


def ward_fit(X, k: int) -> ClusterModel:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ParameterError("corpus must be a non-empty 2-D matrix")
    if not 1 <= k <= len(X):
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={len(X)}")
    Z = ward_linkage(X)
    labels, order = compact_labels(cut_tree(Z, len(X), k))
    return ClusterModel(Algorithm.WARD, labels, len(order), {"k": k},
                        extra={"merge_heights": Z[:, 2].tolist(), "linkage": Z.tolist()})
