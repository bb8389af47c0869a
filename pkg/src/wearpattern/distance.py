"""Distance and kernel functions shared by the clustering engines."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

from . import kernels
from .errors import DimensionError, ParameterError, UndefinedDistanceError


class Metric(str, Enum):
    EUCLIDEAN = "euclidean"
    SHAPE_BASED = "sbd"
    RBF = "rbf"


@dataclass(frozen=True)
class DistanceKind:
    metric: Metric = Metric.EUCLIDEAN
    gamma: float | None = None

    def __post_init__(self):
        if self.metric is Metric.RBF and not (self.gamma is not None and self.gamma > 0):
            raise ParameterError(f"RBF kernel needs gamma > 0, got {self.gamma}")


def _pair(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    return a, b


def euclidean(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.sqrt(np.sum((a - b) ** 2)))


def znormalize(X) -> np.ndarray:
    """Row-wise z-normalization (population std). Constant rows become zero."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mu = X.mean(axis=1, keepdims=True)
    sd = X.std(axis=1, keepdims=True)
    centered = X - mu
    # tolerance absorbs the rounding residue of a constant row
    flat = sd <= 1e-12 * np.maximum(1.0, np.abs(mu))
    return np.where(flat, 0.0, centered / np.where(flat, 1.0, sd))


def shape_based_distance(a, b) -> float:
    """``1 - max_s NCC_c(a, b, s)`` over circular shifts of the z-normalized inputs.

    Lies in ``[0, 2]``. A constant input against a non-constant one has no
    correlation and scores 1; two constant inputs are undefined.
    """
    a, b = _pair(a, b)
    if a.size < 2:
        raise DimensionError("shape-based distance needs length >= 2")
    za, zb = znormalize(np.vstack([a, b]))
    dist, _ = kernels.sbd_matrix(za[None], zb[None])
    d = float(dist[0, 0])
    if np.isnan(d):
        raise UndefinedDistanceError("both series are constant")
    return min(max(d, 0.0), 2.0)


def sbd_pairwise(X, Y=None) -> tuple[np.ndarray, np.ndarray]:
    """SBD matrix and best circular shifts between rows of ``X`` and ``Y``."""
    ZX = znormalize(X)
    ZY = ZX if Y is None else znormalize(Y)
    dist, shift = kernels.sbd_matrix(ZX, ZY)
    if np.isnan(dist).any():
        raise UndefinedDistanceError("SBD undefined between two constant series")
    return np.clip(dist, 0.0, 2.0), shift


def rbf_kernel(a, b, gamma: float) -> float:
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    a, b = _pair(a, b)
    return float(np.exp(-gamma * np.sum((a - b) ** 2)))


def sq_euclidean_matrix(X, Y=None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    return cdist(X, Y, "sqeuclidean")


def euclidean_matrix(X, Y=None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    return cdist(X, Y, "euclidean")


def rbf_gram(X, gamma: float) -> np.ndarray:
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    return np.exp(-gamma * sq_euclidean_matrix(X))


def median_gamma(X) -> float:
    """``1 / median`` of the non-zero squared pairwise distances."""
    d = sq_euclidean_matrix(X)
    vals = d[np.triu_indices_from(d, k=1)]
    vals = vals[vals > 0]
    return 1.0 / float(np.median(vals)) if vals.size else 1.0
