"""Intrinsic model selection (silhouette, elbow) and extrinsic scores against ground truth."""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .clustering import Algorithm, ClusterModel, fit
from .clustering.partition import kernel_objective
from .distance import euclidean_matrix, rbf_gram, sbd_pairwise
from .errors import DimensionError, InsufficientCurveError, ParameterError, UndefinedScoreError


def silhouette(X, labels, metric: str = "euclidean") -> float:
    """Mean silhouette over non-noise points.

    ``metric`` is ``"euclidean"``, ``"sbd"`` or ``"precomputed"`` (``X`` is
    then a square distance matrix). Points alone in their cluster score 0.
    """
    labels = np.asarray(labels)
    keep = labels != -1
    if metric == "precomputed":
        D = np.asarray(X, dtype=float)[np.ix_(keep, keep)]
    elif metric == "euclidean":
        D = euclidean_matrix(np.asarray(X, dtype=float)[keep])
    elif metric == "sbd":
        D = sbd_pairwise(np.asarray(X, dtype=float)[keep])[0]
    else:
        raise ParameterError(f"unknown metric {metric!r}")
    labels = labels[keep]
    ids, inv = np.unique(labels, return_inverse=True)
    if len(ids) < 2:
        raise UndefinedScoreError("silhouette needs at least two clusters")
    n = len(labels)
    onehot = np.zeros((n, len(ids)))
    onehot[np.arange(n), inv] = 1.0
    sizes = onehot.sum(axis=0)
    sums = D @ onehot
    own = sizes[inv]
    a = np.where(own > 1, sums[np.arange(n), inv] / np.maximum(own - 1, 1), 0.0)
    mean_other = sums / sizes
    mean_other[np.arange(n), inv] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def distortion(X, model: ClusterModel) -> float:
    """Sum of squared distances from each (non-noise) series to its cluster's prototype.

    k-shape uses squared SBD, kernel k-means the feature-space distance to
    the cluster mean; engines without prototypes use the Euclidean mean.
    """
    X = np.asarray(X, dtype=float)
    labels = model.labels
    keep = labels >= 0
    if model.algorithm is Algorithm.KSHAPE:
        d, _ = sbd_pairwise(X[keep], model.prototypes)
        return float((d[np.arange(keep.sum()), labels[keep]] ** 2).sum())
    if model.algorithm is Algorithm.KERNEL_KMEANS:
        kernel = model.params.get("kernel", "rbf")
        K = X @ X.T if kernel == "linear" else rbf_gram(X, model.params["gamma"])
        return kernel_objective(K, labels, model.n_clusters)
    if model.prototypes is not None:
        centers = model.prototypes
    else:
        centers = np.stack([X[labels == c].mean(axis=0) for c in range(model.n_clusters)])
    return float(((X[keep] - centers[labels[keep]]) ** 2).sum())


class Elbow(NamedTuple):
    k: int
    low_confidence: bool
    second_differences: dict


def elbow_detect(curve: Mapping[int, float]) -> Elbow:
    """Knee of a distortion curve: the k maximizing ``d[k-1] - 2 d[k] + d[k+1]``.

    Ties go to the smallest k. The result is flagged low-confidence when the
    largest second difference is not clearly positive or is shared.
    """
    ks = sorted(curve)
    if len(ks) < 3:
        raise InsufficientCurveError("need distortion for at least three k values")
    if ks != list(range(ks[0], ks[0] + len(ks))):
        raise InsufficientCurveError(f"k values must be consecutive, got {ks}")
    d = np.array([float(curve[k]) for k in ks])
    second = d[:-2] - 2 * d[1:-1] + d[2:]
    tol = 1e-12 * max(1.0, float(np.abs(d).max()))
    best = float(second.max())
    winners = np.flatnonzero(second >= best - tol)
    k = ks[1 + int(winners[0])]
    low = best <= tol or len(winners) > 1
    return Elbow(k, bool(low), {ks[i + 1]: float(v) for i, v in enumerate(second)})


def _with_noise_as_singletons(labels):
    labels = np.asarray(labels).astype(object)
    out = labels.copy()
    for i in np.flatnonzero(labels == -1):
        out[i] = ("noise", int(i))
    return out


def _contingency(labels, truth):
    labels = _with_noise_as_singletons(labels)
    truth = list(truth)
    if len(labels) != len(truth):
        raise DimensionError(f"length mismatch: {len(labels)} labels vs {len(truth)} truth")
    _, li = np.unique(np.array([repr(v) for v in labels]), return_inverse=True)
    _, ti = np.unique(np.array([repr(v) for v in truth]), return_inverse=True)
    table = np.zeros((li.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(table, (li, ti), 1)
    return table


def purity(labels, truth) -> float:
    """Share of points whose cluster's majority class is their own class.

    Noise points (``-1``) each count as their own cluster.
    """
    if len(labels) == 0:
        raise ParameterError("purity of an empty labelling is undefined")
    table = _contingency(labels, truth)
    return int(table.max(axis=1).sum()) / int(table.sum())


def rand_index(labels, truth) -> float:
    """Fraction of point pairs on which the two partitions agree."""
    if len(labels) < 2:
        raise ParameterError("rand index needs at least two points")
    table = _contingency(labels, truth)
    n = int(table.sum())
    pairs = lambda v: int((v * (v - 1) // 2).sum())  # noqa: E731
    total = n * (n - 1) // 2
    same_both = pairs(table)
    same_l = pairs(table.sum(axis=1))
    same_t = pairs(table.sum(axis=0))
    agree = total + 2 * same_both - same_l - same_t
    return agree / total


def cohens_kappa(ann1: Sequence, ann2: Sequence) -> float:
    """Chance-corrected agreement ``(p_o - p_e) / (1 - p_e)``.

    Two identical constant annotations give 1. Two constant annotations on
    different labels share no alphabet and raise.
    """
    a, b = list(ann1), list(ann2)
    if len(a) != len(b):
        raise DimensionError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ParameterError("need at least one annotated item")
    n = len(a)
    cats = sorted(set(a) | set(b), key=repr)
    if len(set(a)) == 1 and len(set(b)) == 1 and a[0] != b[0]:
        raise UndefinedScoreError("annotators are constant on different labels")
    p_o = sum(x == y for x, y in zip(a, b)) / n
    p_e = sum((a.count(c) / n) * (b.count(c) / n) for c in cats)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def extrinsic_scores(labels, truth) -> dict:
    labels = np.asarray(labels)
    clusters = len(set(labels[labels >= 0].tolist())) + int((labels == -1).sum())
    return {
        "purity": purity(labels, truth),
        "rand_index": rand_index(labels, truth),
        "n_clusters": clusters,
        "purity_degenerate": clusters == len(labels),  # every point alone: purity is trivially 1
    }


@dataclass
class EvalReport:
    algorithm: str
    k_results: dict[int, dict] = field(default_factory=dict)  # k -> {silhouette, distortion}
    chosen_k: int | None = None  # by silhouette
    elbow_k: int | None = None
    elbow_low_confidence: bool | None = None
    extrinsic: dict | None = None
    annotator_kappa: float | None = None

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "k_results": {str(k): v for k, v in sorted(self.k_results.items())},
            "chosen_k": self.chosen_k,
            "elbow_k": self.elbow_k,
            "elbow_low_confidence": self.elbow_low_confidence,
            "extrinsic": self.extrinsic,
            "annotator_kappa": self.annotator_kappa,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def write_sweep_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "silhouette", "distortion"])
        for k in sorted(self.k_results):
            r = self.k_results[k]
            w.writerow([k, repr(r["silhouette"]), repr(r["distortion"])])


def k_sweep(X, algorithm, ks: Iterable[int], seed: int = 0, jobs: int = 1, **fit_kw) -> EvalReport:
    """Fit ``algorithm`` for every k, scoring silhouette and distortion.

    The silhouette uses SBD for k-shape and Euclidean distance otherwise.
    ``chosen_k`` maximizes the silhouette (smallest k on ties); the elbow
    pick is reported next to it when at least three k values were swept.
    """
    algorithm = Algorithm(algorithm)
    if algorithm in (Algorithm.DBSCAN, Algorithm.OPTICS, Algorithm.SOM):
        raise ParameterError(f"{algorithm.value} has no k to sweep")
    X = np.asarray(X, dtype=float)
    ks = sorted(set(int(k) for k in ks))
    metric = "sbd" if algorithm is Algorithm.KSHAPE else "euclidean"

    def one(k):
        model = fit(algorithm, X, k=k, seed=seed, **fit_kw)
        try:
            s = silhouette(X, model.labels, metric)
        except UndefinedScoreError:
            s = float("nan")
        return k, {"silhouette": s, "distortion": distortion(X, model)}

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            results = dict(ex.map(one, ks))
    else:
        results = dict(map(one, ks))
    report = EvalReport(algorithm.value, results)
    scored = [(r["silhouette"], -k) for k, r in results.items() if np.isfinite(r["silhouette"])]
    if scored:
        report.chosen_k = -max(scored)[1]
    if len(ks) >= 3:
        elbow = elbow_detect({k: r["distortion"] for k, r in results.items()})
        report.elbow_k, report.elbow_low_confidence = elbow.k, elbow.low_confidence
    return report
