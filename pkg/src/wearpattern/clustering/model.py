from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Any

import numpy as np

from ..errors import ParameterError


class Algorithm(str, Enum):
    KMEANS = "kmeans"
    KSHAPE = "kshape"
    KERNEL_KMEANS = "kernel-kmeans"
    DBSCAN = "dbscan"
    OPTICS = "optics"
    WARD = "ward"
    SOM = "som"


WITH_PROTOTYPES = {Algorithm.KMEANS, Algorithm.KSHAPE, Algorithm.SOM}
DENSITY = {Algorithm.DBSCAN, Algorithm.OPTICS}


@dataclass(eq=False)
class ClusterModel:
    """A fitted clustering: labels per series plus whatever the engine produces.

    ``labels`` use ``-1`` for noise (density engines only) and otherwise run
    over ``0..n_clusters-1`` with label 0 the largest cluster. ``history``
    holds the per-iteration objective for iterative engines; ``extra`` holds
    engine-specific artifacts (reachability plot, SOM codebook, merge
    heights).
    """

    algorithm: Algorithm
    labels: np.ndarray
    n_clusters: int
    params: dict[str, Any] = field(default_factory=dict)
    prototypes: np.ndarray | None = None
    seed: int | None = None
    history: list[float] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.algorithm = Algorithm(self.algorithm)
        self.labels = np.asarray(self.labels, dtype=int)
        check_labels(self.labels, self.n_clusters, self.algorithm in DENSITY)
        if (self.prototypes is not None) != (self.algorithm in WITH_PROTOTYPES):
            raise ParameterError(f"{self.algorithm.value}: prototypes present iff kmeans/kshape/som")
        if self.prototypes is not None:
            self.prototypes = np.asarray(self.prototypes, dtype=float)
            if len(self.prototypes) != self.n_clusters:
                raise ParameterError("one prototype per cluster required")

    @property
    def noise_count(self) -> int:
        return int((self.labels == -1).sum())

    def to_dict(self, series_keys=None) -> dict:
        out = {
            "algorithm": self.algorithm.value,
            "params": _jsonable(self.params),
            "seed": self.seed,
            "n_clusters": self.n_clusters,
            "labels": self.labels.tolist(),
            "prototypes": None if self.prototypes is None else self.prototypes.tolist(),
            "history": [float(h) for h in self.history],
            "extra": _jsonable(self.extra),
        }
        if series_keys is not None:
            out["series"] = [[u, str(d)] for u, d in series_keys]
        return out

    def to_json(self, fh: IO[str] | None = None, series_keys=None) -> str:
        text = json.dumps(self.to_dict(series_keys), indent=1) + "\n"
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterModel":
        protos = d.get("prototypes")
        return cls(
            algorithm=Algorithm(d["algorithm"]),
            labels=np.asarray(d["labels"], dtype=int),
            n_clusters=int(d["n_clusters"]),
            params=dict(d.get("params") or {}),
            prototypes=None if protos is None else np.asarray(protos, dtype=float),
            seed=d.get("seed"),
            history=list(d.get("history") or []),
            extra=dict(d.get("extra") or {}),
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, Enum):
        return obj.value
    return obj


def check_labels(labels: np.ndarray, n_clusters: int, allow_noise: bool) -> None:
    if labels.ndim != 1:
        raise ParameterError("labels must be one-dimensional")
    if not allow_noise and (labels < 0).any():
        raise ParameterError("noise labels only allowed for density engines")
    used = np.unique(labels[labels >= 0])
    if not np.array_equal(used, np.arange(n_clusters)):
        raise ParameterError(f"labels {used.tolist()} are not contiguous 0..{n_clusters - 1}")


def compact_labels(raw) -> tuple[np.ndarray, list[int]]:
    """Renumber clusters by descending size; ties go to the earlier first member.

    Negative labels are noise and stay ``-1``. Returns the new labels and the
    list of old label values in new order.
    """
    raw = np.asarray(raw, dtype=int)
    ids = [v for v in dict.fromkeys(raw.tolist()) if v >= 0]  # order of first appearance
    sizes = {v: int((raw == v).sum()) for v in ids}
    order = sorted(ids, key=lambda v: -sizes[v])  # stable sort keeps first-appearance ties
    mapping = {old: new for new, old in enumerate(order)}
    labels = np.array([mapping.get(v, -1) for v in raw.tolist()], dtype=int)
    return labels, order


@dataclass(frozen=True)
class ClusterSummary:
    label: int
    mean: np.ndarray
    count: int


def cluster_summary(model: ClusterModel, X) -> list[ClusterSummary]:
    """Elementwise mean curve and member count of every (non-noise) cluster."""
    X = np.asarray(X, dtype=float)
    if len(X) != len(model.labels):
        raise ParameterError("model labels and corpus size differ")
    return [
        ClusterSummary(c, X[model.labels == c].mean(axis=0), int((model.labels == c).sum()))
        for c in range(model.n_clusters)
    ]


def write_mean_curve_csv(summary: ClusterSummary, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["slot", "mean", "count"])
    for i, v in enumerate(summary.mean):
        w.writerow([i, repr(float(v)), summary.count])
