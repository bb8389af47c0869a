"""Self-organizing map clustering: online training, one cluster per occupied unit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ParameterError
from .model import Algorithm, ClusterModel, compact_labels

DEFAULT_ITERATIONS = 10_000
DEFAULT_LEARNING_RATE = 0.5


def _ceil_sqrt(n: int) -> int:
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def som_grid_side(num_users: int) -> int:
    if int(num_users) != num_users or num_users < 1:
        raise ParameterError(f"num_users must be a positive integer, got {num_users}")
    return _ceil_sqrt(_ceil_sqrt(int(num_users)))


def som_grid_size(num_users: int) -> int:
    """Number of map units: ``ceil(sqrt(ceil(sqrt(num_users))))`` squared."""
    return som_grid_side(num_users) ** 2


@dataclass(frozen=True)
class SomGrid:
    rows: int
    cols: int
    iterations: int = DEFAULT_ITERATIONS
    initial_learning_rate: float = DEFAULT_LEARNING_RATE
    initial_radius: float | None = None  # default max(rows, cols) / 2

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ParameterError("grid needs at least one row and one column")
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")
        if not 0 < self.initial_learning_rate <= 1:
            raise ParameterError("initial_learning_rate must lie in (0, 1]")
        if self.initial_radius is not None and not self.initial_radius > 0:
            raise ParameterError("initial_radius must be positive")

    @classmethod
    def for_users(cls, num_users: int, **kw) -> "SomGrid":
        side = som_grid_side(num_users)
        return cls(side, side, **kw)

    @property
    def units(self) -> int:
        return self.rows * self.cols

    @property
    def radius(self) -> float:
        return self.initial_radius if self.initial_radius is not None else max(self.rows, self.cols) / 2

    @property
    def time_constant(self) -> float:
        # exp(-t/tau) then shrinks the radius to 1 by the last step; a radius
        # already <= 1 decays by a factor e over the run instead
        r = self.radius
        return self.iterations / math.log(r) if r > 1 else float(self.iterations)

    def grid_sq_distances(self) -> np.ndarray:
        rc = np.array([(u // self.cols, u % self.cols) for u in range(self.units)], dtype=float)
        diff = rc[:, None, :] - rc[None, :, :]
        return (diff ** 2).sum(axis=2)


def quantization_error(X, codebook) -> float:
    """Mean distance from each series to its best-matching unit."""
    d2 = ((X[:, None, :] - codebook[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.min(axis=1)).mean())


def best_matching_units(X, codebook) -> np.ndarray:
    d2 = ((X[:, None, :] - codebook[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def som_fit(X, grid: SomGrid, seed: int = 0, initial_codebook=None) -> ClusterModel:
    """Train a SOM online and label each series by its final best-matching unit.

    Each step draws one series at random and pulls all units toward it with a
    Gaussian neighbourhood; learning rate and radius decay exponentially.
    The codebook starts from randomly drawn series unless
    ``initial_codebook`` is given. Units that win no series are dropped.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ParameterError("corpus must be a non-empty 2-D matrix")
    rng = np.random.default_rng(seed)
    n = len(X)
    if initial_codebook is None:
        pick = rng.choice(n, size=grid.units, replace=grid.units > n)
        codebook = X[pick].copy()
    else:
        codebook = np.array(initial_codebook, dtype=float)
        if codebook.shape != (grid.units, X.shape[1]):
            raise ParameterError(f"initial codebook must have shape {(grid.units, X.shape[1])}")
    codebook = np.ascontiguousarray(codebook)
    qe0 = quantization_error(X, codebook)
    order = rng.integers(0, n, size=grid.iterations)
    kernels.som_train(codebook, np.ascontiguousarray(X), order, grid.grid_sq_distances(),
                      grid.initial_learning_rate, grid.radius, grid.time_constant)
    units = best_matching_units(X, codebook)
    labels, kept = compact_labels(units)
    params = {
        "rows": grid.rows, "cols": grid.cols, "iterations": grid.iterations,
        "initial_learning_rate": grid.initial_learning_rate, "initial_radius": grid.radius,
    }
    extra = {
        "codebook": codebook.tolist(),
        "unit_of_cluster": kept,
        "quantization_error_initial": qe0,
        "quantization_error_final": quantization_error(X, codebook),
    }
    return ClusterModel(Algorithm.SOM, labels, len(kept), params, codebook[kept], seed, extra=extra)
