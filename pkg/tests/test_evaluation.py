import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import purity_overlap, rand_index_pairs, silhouette_loops
from sklearn.metrics import cohen_kappa_score, silhouette_score

from wearpattern.clustering import kmeans_fit, kshape_fit
from wearpattern.distance import sbd_pairwise
from wearpattern.errors import (
    DimensionError,
    InsufficientCurveError,
    ParameterError,
    UndefinedScoreError,
)
from wearpattern.evaluation import (
    cohens_kappa,
    distortion,
    elbow_detect,
    extrinsic_scores,
    k_sweep,
    purity,
    rand_index,
    silhouette,
)

label_pairs = st.integers(2, 10).flatmap(
    lambda n: st.tuples(st.lists(st.integers(-1, 3), min_size=n, max_size=n),
                        st.lists(st.sampled_from("abc"), min_size=n, max_size=n)))


@settings(max_examples=200, deadline=None)
@given(label_pairs)
def test_extrinsic_scores_match_enumeration(pair):
    labels, truth = pair
    assert rand_index(labels, truth) == rand_index_pairs(labels, truth)
    assert purity(labels, truth) == purity_overlap(labels, truth)


def test_silhouette_matches_loops_and_sklearn():
    rng = np.random.default_rng(0)
    for n in (5, 20, 50):
        X = rng.normal(size=(n, 4))
        labels = rng.integers(0, 3, n)
        ours = silhouette(X, labels)
        assert ours == pytest.approx(silhouette_loops(X, labels), abs=1e-12)
        assert ours == pytest.approx(silhouette_score(X, labels), abs=1e-12)


def test_silhouette_variants():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(12, 16))
    labels = np.repeat([0, 1, 2], 4)
    D = sbd_pairwise(X)[0]
    assert silhouette(X, labels, "sbd") == pytest.approx(silhouette(D, labels, "precomputed"))
    noisy = labels.copy()
    noisy[0] = -1
    assert silhouette(X, noisy) == pytest.approx(silhouette(X[1:], labels[1:]))
    with pytest.raises(UndefinedScoreError):
        silhouette(X, np.zeros(12, dtype=int))
    with pytest.raises(ParameterError):
        silhouette(X, labels, "cosine")


def test_elbow_detect():
    e = elbow_detect({1: 100.0, 2: 50.0, 3: 20.0, 4: 18.0, 5: 17.0})
    assert e.k == 3 and not e.low_confidence
    assert elbow_detect({2: 3.0, 3: 2.0, 4: 1.0}).low_confidence  # straight line
    with pytest.raises(InsufficientCurveError):
        elbow_detect({2: 1.0, 3: 0.5})
    with pytest.raises(InsufficientCurveError):
        elbow_detect({2: 1.0, 3: 0.5, 5: 0.2})


def test_cohens_kappa_matches_sklearn():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a = rng.choice(list("xyz"), 30).tolist()
        b = rng.choice(list("xyz"), 30).tolist()
        assert cohens_kappa(a, b) == pytest.approx(cohen_kappa_score(a, b), abs=1e-12)
    assert cohens_kappa(["x"] * 4, ["x"] * 4) == 1.0
    with pytest.raises(UndefinedScoreError):
        cohens_kappa(["x"] * 4, ["y"] * 4)
    with pytest.raises(DimensionError):
        cohens_kappa(["x"], ["x", "y"])


def test_extrinsic_flags_all_singletons():
    s = extrinsic_scores([-1, -1, -1], ["a", "a", "b"])
    assert s["purity"] == 1.0 and s["purity_degenerate"] and s["n_clusters"] == 3


def test_distortion():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 6))
    m = kmeans_fit(X, 3)
    assert distortion(X, m) == pytest.approx(m.history[-1])
    ks = kshape_fit(X, 2)
    d = sbd_pairwise(X, ks.prototypes)[0]
    assert distortion(X, ks) == pytest.approx(float((d[np.arange(30), ks.labels] ** 2).sum()))


def test_k_sweep_parallel_equals_serial():
    rng = np.random.default_rng(4)
    X = np.vstack([c + rng.normal(0, 0.2, (15, 5)) for c in rng.normal(0, 3, (3, 5))])
    serial = k_sweep(X, "kmeans", range(2, 7))
    threaded = k_sweep(X, "kmeans", range(2, 7), jobs=3)
    assert serial.to_json() == threaded.to_json()
    assert serial.chosen_k == 3 and serial.elbow_k == 3
    with pytest.raises(ParameterError):
        k_sweep(X, "dbscan", range(2, 4))
