import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import fcluster, linkage
from sklearn.cluster import DBSCAN

from wearpattern.clustering import (
    Algorithm,
    ClusterModel,
    SomGrid,
    cluster_summary,
    compact_labels,
    dbscan_fit,
    default_eps,
    fit,
    kernel_kmeans_fit,
    kmeans_fit,
    kshape_fit,
    optics_fit,
    reachability_valleys,
    som_fit,
    som_grid_size,
    ward_fit,
    ward_linkage,
)
from wearpattern.clustering.density import core_distances
from wearpattern.distance import euclidean_matrix
from wearpattern.errors import ParameterError, PreprocessingError
from wearpattern.evaluation import rand_index


def blobs(seed=0, k=3, per=20, dim=8, spread=0.2):
    rng = np.random.default_rng(seed)
    centers = rng.normal(0, 3, (k, dim))
    X = np.vstack([c + rng.normal(0, spread, (per, dim)) for c in centers])
    return X, np.repeat(np.arange(k), per)


def shapes(seed=0, per=10, length=48):
    """Three waveforms, each member randomly rescaled, offset and shifted."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 2 * np.pi, length, endpoint=False)
    bases = [np.sin(t), np.sign(np.sin(t)), np.exp(-((t - np.pi) ** 2))]
    rows, truth = [], []
    for c, b in enumerate(bases):
        for _ in range(per):
            x = rng.uniform(0.5, 3) * np.roll(b, rng.integers(-3, 4)) + rng.uniform(-2, 2)
            rows.append(x + rng.normal(0, 0.05, length))
            truth.append(c)
    return np.array(rows), np.array(truth)


def test_compact_labels_orders_by_size_then_first_appearance():
    labels, order = compact_labels([7, 3, 3, -1, 9, 7, 9])
    assert order == [7, 3, 9]
    assert labels.tolist() == [0, 1, 1, -1, 2, 0, 2]


def test_model_validates_and_roundtrips():
    with pytest.raises(ParameterError):
        ClusterModel(Algorithm.KMEANS, np.array([0, 2]), 2, {})
    with pytest.raises(ParameterError):
        ClusterModel(Algorithm.KMEANS, np.array([0, -1]), 1, {})
    X, _ = blobs()
    m = kmeans_fit(X, 3, seed=1)
    back = ClusterModel.from_dict(json.loads(m.to_json()))
    assert np.array_equal(back.labels, m.labels)
    np.testing.assert_array_equal(back.prototypes, m.prototypes)
    assert back.algorithm is Algorithm.KMEANS


@pytest.mark.parametrize("algo", ["kmeans", "kernel-kmeans", "ward", "som"])
def test_engines_recover_blobs(algo):
    X, truth = blobs()
    model = fit(algo, X, k=3, seed=0, grid=SomGrid(3, 3, iterations=3000))
    assert rand_index(model.labels, truth) == 1.0
    assert model.n_clusters == 3


def test_kmeans_history_is_non_increasing():
    X, _ = blobs(seed=3, spread=1.0)
    h = kmeans_fit(X, 4, seed=0).history
    assert all(b <= a + 1e-9 for a, b in zip(h, h[1:]))


def test_kshape_groups_shifted_scaled_copies():
    X, truth = shapes()
    model = kshape_fit(X, 3, seed=0)
    assert rand_index(model.labels, truth) == 1.0
    assert model.prototypes.shape == (3, 48)


def test_kshape_rejects_constant_rows():
    X, _ = shapes()
    X[4] = 2.0
    with pytest.raises(PreprocessingError, match="4"):
        kshape_fit(X, 3)


def test_kernel_kmeans_rbf_separates_rings():
    rng = np.random.default_rng(0)
    angle = rng.uniform(0, 2 * np.pi, 120)
    radius = np.repeat([1.0, 5.0], 60)
    X = np.c_[radius * np.cos(angle), radius * np.sin(angle)] + rng.normal(0, 0.05, (120, 2))
    model = kernel_kmeans_fit(X, 2, gamma=0.5, seed=0)
    assert rand_index(model.labels, np.repeat([0, 1], 60)) == 1.0


def test_kernel_kmeans_linear_equals_kmeans_partition():
    X, _ = blobs(seed=4)
    a = kernel_kmeans_fit(X, 3, kernel="linear", seed=0)
    b = kmeans_fit(X, 3, seed=0)
    assert rand_index(a.labels, b.labels) == 1.0


@pytest.mark.parametrize("algo", ["kmeans", "kshape", "kernel-kmeans", "som", "dbscan", "optics", "ward"])
def test_fits_are_deterministic(algo):
    X, _ = shapes(seed=2)
    a = fit(algo, X, k=3, seed=5, grid=SomGrid(2, 2, iterations=500))
    b = fit(algo, X, k=3, seed=5, grid=SomGrid(2, 2, iterations=500))
    assert a.to_json() == b.to_json()


def test_k_bounds():
    X, _ = blobs()
    for bad in (0, len(X) + 1):
        with pytest.raises(ParameterError):
            kmeans_fit(X, bad)


def same_partition(a, b):
    """Equal noise sets and equal groupings of the clustered points."""
    a, b = np.asarray(a), np.asarray(b)
    keep = a >= 0
    return np.array_equal(a < 0, b < 0) and (keep.sum() < 2 or rand_index(a[keep], b[keep]) == 1.0)


def test_dbscan_matches_sklearn():
    for seed in range(5):
        X, _ = blobs(seed=seed, spread=0.6)
        X = np.vstack([X, np.random.default_rng(seed).uniform(-8, 8, (5, 8))])
        eps = default_eps(X)
        ours = dbscan_fit(X, eps=eps, min_pts=5).labels
        sk = DBSCAN(eps=eps, min_samples=5).fit(X)
        core = np.zeros(len(X), dtype=bool)
        core[sk.core_sample_indices_] = True
        assert np.array_equal(ours == -1, sk.labels_ == -1)
        # borders may sit between clusters; sklearn resolves them by visiting order
        assert same_partition(ours[core], sk.labels_[core])
        D = euclidean_matrix(X)
        for p in np.flatnonzero(~core & (ours >= 0)):
            nearest = np.flatnonzero(core)[D[p, core].argmin()]
            assert ours[p] == ours[nearest]


def test_dbscan_is_order_invariant():
    X, _ = blobs(seed=1, spread=0.8)
    eps = default_eps(X)
    perm = np.random.default_rng(0).permutation(len(X))
    a = dbscan_fit(X, eps=eps).labels
    b = dbscan_fit(X[perm], eps=eps).labels
    assert (a >= 0).sum() > len(X) // 2
    assert same_partition(a[perm], b)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.3, 3.0), st.integers(2, 6))
def test_optics_cut_reproduces_dbscan(seed, eps, min_pts):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (15, 2)), rng.normal(4, 0.5, (10, 2))])
    d = dbscan_fit(X, eps=eps, min_pts=min_pts)
    o = optics_fit(X, min_pts=min_pts, eps=eps)
    assert np.array_equal(d.labels, o.labels)


def test_optics_extras_and_valleys():
    X, _ = blobs(seed=0)
    m = optics_fit(X)
    assert sorted(m.extra["ordering"]) == list(range(len(X)))
    reach = np.array(m.extra["reachability"])
    assert np.isinf(reach[0])
    assert reachability_valleys(reach, default_eps(X)) == 3
    core = core_distances(euclidean_matrix(X), 5)
    np.testing.assert_allclose(m.extra["core_distance"], core)


def test_reachability_valleys_counts_runs():
    assert reachability_valleys([np.inf, 1, 1, 5, 1, 9, 1, 1, 1], 2) == 2
    assert reachability_valleys([np.inf, 1, 1, 5, 1, 9, 1, 1, 1], 2, min_size=1) == 3


def test_ward_matches_scipy():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 5))
    Z = ward_linkage(X)
    ref = linkage(X, "ward")
    np.testing.assert_allclose(Z[:, 2], ref[:, 2], rtol=1e-10)
    np.testing.assert_array_equal(Z[:, 3], ref[:, 3])
    for k in (2, 3, 5):
        ours = ward_fit(X, k).labels
        assert rand_index(ours, fcluster(ref, k, "maxclust")) == 1.0


def test_som_grid_and_fit():
    assert [som_grid_size(n) for n in (1, 2, 15, 16, 17, 256, 322)] == [1, 4, 4, 4, 9, 16, 25]
    X, _ = blobs()
    m = som_fit(X, SomGrid(3, 3, iterations=2000), seed=0)
    mean_only = np.linalg.norm(X - X.mean(axis=0), axis=1).mean()
    assert m.extra["quantization_error_final"] < mean_only
    assert m.n_clusters == len(m.extra["unit_of_cluster"]) <= 9
    assert m.prototypes.shape == (m.n_clusters, X.shape[1])
    assert SomGrid(1, 1).time_constant == SomGrid(1, 1).iterations
    with pytest.raises(ParameterError):
        SomGrid(0, 2)


def test_cluster_summary_means():
    X, truth = blobs()
    m = kmeans_fit(X, 3)
    for s in cluster_summary(m, X):
        np.testing.assert_allclose(s.mean, X[m.labels == s.label].mean(axis=0))
        assert s.count == 20


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_partition_invariants(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 4))
    for algo in ("kmeans", "kernel-kmeans", "ward"):
        m = fit(algo, X, k=k, seed=seed)
        assert m.n_clusters == k
        assert sorted(set(m.labels.tolist())) == list(range(k))
        sizes = np.bincount(m.labels)
        assert all(a >= b for a, b in zip(sizes, sizes[1:]))
