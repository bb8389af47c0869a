"""Density engines: DBSCAN and OPTICS with an eps-cut extraction.

Both share one convention so that OPTICS cut at ``eps`` reproduces DBSCAN
at ``eps`` exactly: a point's neighbourhood includes the point itself, a
core point has at least ``min_pts`` neighbours within ``eps``, and a border
point joins the cluster of its nearest core neighbour (lowest index on
ties). The last rule also makes DBSCAN independent of input order.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .. import kernels
from ..distance import euclidean_matrix
from ..errors import ParameterError
from .model import Algorithm, ClusterModel, compact_labels

DEFAULT_MIN_PTS = 5
DEFAULT_EPS_PERCENTILE = 95.0


def core_distances(D: np.ndarray, min_pts: int) -> np.ndarray:
    """Distance to the ``min_pts``-th nearest neighbour, counting the point itself."""
    n = len(D)
    if min_pts > n:
        return np.full(n, np.inf)
    return np.partition(D, min_pts - 1, axis=1)[:, min_pts - 1]


def default_eps(X, min_pts: int = DEFAULT_MIN_PTS, percentile: float = DEFAULT_EPS_PERCENTILE) -> float:
    """The given percentile of the ``min_pts``-nearest-neighbour distances."""
    D = euclidean_matrix(X)
    core = core_distances(D, min(min_pts, len(D)))
    return float(np.percentile(core, percentile))


def _check(X, min_pts, eps=None):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ParameterError("corpus must be a non-empty 2-D matrix")
    if int(min_pts) != min_pts or min_pts < 1:
        raise ParameterError(f"min_pts must be a positive integer, got {min_pts}")
    if eps is not None and not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    return X


def _attach_border(D, core_mask, core_labels, eps):
    """Full label vector from core-point labels: borders to nearest core, rest noise."""
    n = len(D)
    labels = np.full(n, -1)
    labels[core_mask] = core_labels[core_mask]
    core_idx = np.flatnonzero(core_mask)
    if core_idx.size == 0:
        return labels
    for p in np.flatnonzero(~core_mask):
        d = D[p, core_idx]
        j = int(d.argmin())
        if d[j] <= eps:
            labels[p] = labels[core_idx[j]]
    return labels


def _dbscan_labels(D, eps, min_pts):
    core_mask = (D <= eps).sum(axis=1) >= min_pts
    adj = (D <= eps) & core_mask[:, None] & core_mask[None, :]
    _, comp = connected_components(csr_matrix(adj), directed=False)
    core_labels = np.where(core_mask, comp, -1)
    return _attach_border(D, core_mask, core_labels, eps)


def dbscan_fit(X, eps: float | None = None, min_pts: int = DEFAULT_MIN_PTS) -> ClusterModel:
    """Core/border/noise labelling; noise is ``-1``.

    ``eps`` defaults to :func:`default_eps`.
    """
    X = _check(X, min_pts, eps)
    D = euclidean_matrix(X)
    if eps is None:
        eps = float(np.percentile(core_distances(D, min(min_pts, len(D))), DEFAULT_EPS_PERCENTILE))
    raw = _dbscan_labels(D, eps, min_pts)
    labels, order = compact_labels(raw)
    params = {"eps": float(eps), "min_pts": int(min_pts)}
    return ClusterModel(Algorithm.DBSCAN, labels, len(order), params)


def optics_fit(X, min_pts: int = DEFAULT_MIN_PTS, eps: float | None = None,
               max_eps: float = np.inf) -> ClusterModel:
    """OPTICS ordering plus a horizontal cut of the reachability plot at ``eps``.

    The ordering, reachability (in ordering order) and core distances are
    kept in ``model.extra``.
    """
    X = _check(X, min_pts, eps)
    if not max_eps > 0:
        raise ParameterError(f"max_eps must be positive, got {max_eps}")
    D = euclidean_matrix(X)
    core = core_distances(D, min_pts)
    if eps is None:
        eps = float(np.percentile(core_distances(D, min(min_pts, len(D))), DEFAULT_EPS_PERCENTILE))
    if eps > max_eps:
        raise ParameterError("extraction eps cannot exceed max_eps")
    ordering, reach, _ = kernels.optics_order(D, core, float(max_eps))
    raw = extract_eps_cut(ordering, reach, core, eps)
    core_mask = core <= eps
    raw = _attach_border(D, core_mask, np.where(core_mask, raw, -1), eps)
    labels, order = compact_labels(raw)
    params = {"eps": float(eps), "min_pts": int(min_pts), "max_eps": float(max_eps)}
    extra = {
        "ordering": ordering.tolist(),
        "reachability": reach[ordering].tolist(),
        "core_distance": core.tolist(),
    }
    return ClusterModel(Algorithm.OPTICS, labels, len(order), params, extra=extra)


def extract_eps_cut(ordering, reach, core, eps) -> np.ndarray:
    """Classic DBSCAN-style extraction from an OPTICS ordering."""
    labels = np.full(len(ordering), -1)
    current = -1
    for p in ordering:
        if reach[p] > eps:
            if core[p] <= eps:
                current += 1
                labels[p] = current
        elif current >= 0:
            labels[p] = current
    return labels


def reachability_valleys(reachability, threshold: float, min_size: int = 2) -> int:
    """Count valleys in a reachability plot.

    A valley is a maximal run of consecutive entries at or below
    ``threshold``; runs shorter than ``min_size`` are ignored.
    """
    below = np.asarray(reachability, dtype=float) <= threshold
    count = run = 0
    for b in below:
        if b:
            run += 1
        else:
            count += run >= min_size
            run = 0
    return int(count + (run >= min_size))
