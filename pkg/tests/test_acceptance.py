"""Acceptance criteria, one check per criterion at its stated tolerance.

Run ``python3 tests/test_acceptance.py`` for a standalone pass/fail report,
or let pytest collect it (lines are printed in the terminal summary).
"""
import itertools
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from oracles import (  # noqa: E402
    kendall_pairs,
    ks_d_enumerated,
    pearson_def,
    purity_overlap,
    rand_index_pairs,
    silhouette_loops,
    spearman_def,
)

from wearpattern import clustering  # noqa: E402
from wearpattern.cli import main as cli_main  # noqa: E402
from wearpattern.clustering import SomGrid, som_grid_size  # noqa: E402
from wearpattern.distance import shape_based_distance  # noqa: E402
from wearpattern.evaluation import k_sweep, purity, rand_index, silhouette  # noqa: E402
from wearpattern.patterns import PatternLabel as P  # noqa: E402
from wearpattern.patterns import classify_corpus, pattern_distribution  # noqa: E402
from wearpattern.stats import (  # noqa: E402
    BucketKind,
    kendall_tau,
    ks_permutation_p,
    ks_statistic,
    ks_test,
    pearson,
    spearman,
    temporal_aggregate,
    weekend_weekday_ratio,
)
from wearpattern.synth import DEFAULT_SLEEP_MIX, CorpusSpec, gen_corpus  # noqa: E402

pytestmark = pytest.mark.acceptance

RESULTS: dict[int, tuple[bool, str]] = {}
THREE = {P.VALLEY: 1 / 3, P.DOWNWARD: 1 / 3, P.PEAK: 1 / 3}
SEEDS = range(5)


def three_pattern_corpus(seed):
    """150 user-days: 15 users x 10 days, equal Valley/Downward/Peak mix, sigma 0.02."""
    sc = gen_corpus(CorpusSpec(n_users=15, days_per_user=10, pattern_mix=THREE, noise_sigma=0.02, seed=seed))
    return sc.hr.matrix(), [v.value for v in sc.truth_for()], len(sc.hr.users())


def criterion_1():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    bad = 0
    for _ in range(200):
        n = int(rng.integers(2, 11))
        labels = rng.integers(-1, 4, n).tolist()
        truth = rng.choice(list("abc"), n).tolist()
        bad += rand_index(labels, truth) != rand_index_pairs(labels, truth)
        bad += purity(labels, truth) != purity_overlap(labels, truth)
    worst = 0.0
    for n in (3, 10, 25, 50):
        X = rng.normal(size=(n, 6))
        labels = np.arange(n) % 3
        rng.shuffle(labels)
        worst = max(worst, abs(silhouette(X, labels) - silhouette_loops(X, labels)))
    elapsed = time.perf_counter() - start
    ok = bad == 0 and worst <= 1e-12 and elapsed < 5
    return ok, f"mismatches={bad}/400 silhouette_err={worst:.1e} time={elapsed:.2f}s"


def _engine_scores(seed):
    X, truth, users = three_pattern_corpus(seed)
    grid = SomGrid.for_users(users)
    assert grid.units == som_grid_size(users)
    out = {}
    for algo in ("kmeans", "kshape", "kernel-kmeans", "som", "dbscan", "optics"):
        model = clustering.fit(algo, X, k=3, seed=seed, grid=grid)
        out[algo] = rand_index(model.labels, truth)
    return out


_SCORES = {}


def engine_scores():
    if not _SCORES:
        start = time.perf_counter()
        for seed in SEEDS:
            _SCORES[seed] = _engine_scores(seed)
        _SCORES["time"] = time.perf_counter() - start
    return _SCORES


def criterion_2():
    scores = engine_scores()
    worst = {a: min(scores[s][a] for s in SEEDS) for a in ("kmeans", "kshape", "som")}
    ok = all(v >= 0.95 for v in worst.values()) and scores["time"] < 30
    detail = " ".join(f"{a}_min_RI={v:.3f}" for a, v in worst.items())
    return ok, f"{detail} time={scores['time']:.1f}s"


def criterion_3():
    scores = engine_scores()
    wins = 0
    margins = []
    for s in SEEDS:
        partition = min(scores[s][a] for a in ("som", "kmeans", "kshape", "kernel-kmeans"))
        density = max(scores[s][a] for a in ("dbscan", "optics"))
        wins += partition > density
        margins.append(f"{partition:.3f}>{density:.3f}")
    return wins >= 4, f"seeds_ordered={wins}/5 ({', '.join(margins)})"


def criterion_4():
    got = (som_grid_size(256), som_grid_size(322), som_grid_size(1))
    return got == (16, 25, 1), f"som_grid_size(256, 322, 1)={got}"


def criterion_5():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        a = rng.normal(size=48)
        for alpha, beta in itertools.product((0.5, 2, 10), (-1, 0, 3)):
            worst = max(worst, shape_based_distance(a, alpha * a + beta))
    return worst < 1e-9, f"max_SBD={worst:.1e}"


def _day_recovery(sigma):
    sc = gen_corpus(CorpusSpec(n_users=60, days_per_user=10, pattern_mix=THREE, noise_sigma=sigma, seed=11))
    sleep, _ = classify_corpus(sc.hr)
    hits = sum(sleep[(s.user_id, s.local_date)] is sc.planted[s.user_id] for s in sc.hr.series)
    return hits / len(sc.hr)


def _mix_error(sigma):
    sc = gen_corpus(CorpusSpec(n_users=1000, days_per_user=3, noise_sigma=sigma, seed=12))
    sleep, _ = classify_corpus(sc.hr)
    fractions = pattern_distribution(sleep).fractions
    return max(abs(fractions[lab] - DEFAULT_SLEEP_MIX[lab]) for lab in DEFAULT_SLEEP_MIX)


def criterion_6():
    noisy, clean = _day_recovery(0.02), _day_recovery(0.0)
    mix_noisy, mix_clean = _mix_error(0.02), _mix_error(0.0)
    ok = noisy >= 0.99 and clean == 1.0 and mix_noisy <= 0.02 and mix_clean == 0.0
    return ok, (f"day_recovery sigma.02={noisy:.4f} sigma0={clean:.4f} "
                f"mix_err sigma.02={mix_noisy:.4f} sigma0={mix_clean:.4f}")


def criterion_7():
    rng = np.random.default_rng(7)
    d_bad = 0
    for n1 in range(1, 12):
        for n2 in range(1, 13 - n1):
            for _ in range(3):
                a = rng.integers(0, 6, n1).astype(float)
                b = rng.integers(0, 6, n2).astype(float)
                d_bad += ks_statistic(a, b) != ks_d_enumerated(a, b)
    p_gap = 0.0
    for _ in range(50):
        n1, n2 = (int(v) for v in rng.integers(4, 11, 2))
        a = rng.normal(size=n1)
        b = rng.normal(rng.uniform(0, 1.5), 1, n2)
        p_gap = max(p_gap, abs(ks_test(a, b).p_value - ks_permutation_p(a, b)))
    corr_err = 0.0
    for n in range(3, 13):
        for _ in range(10):
            x = rng.integers(0, 6, n).astype(float)
            y = rng.integers(0, 6, n).astype(float)
            if np.ptp(x) == 0 or np.ptp(y) == 0:
                continue
            corr_err = max(corr_err, abs(pearson(x, y) - pearson_def(x, y)),
                           abs(spearman(x, y) - spearman_def(x, y)),
                           abs(kendall_tau(x, y) - kendall_pairs(x, y)))
    ok = d_bad == 0 and p_gap <= 0.02 and corr_err <= 1e-12
    return ok, (f"D_mismatches={d_bad} max|p_asym-p_perm|={p_gap:.4f} (tol 0.02) "
                f"corr_err={corr_err:.1e}")


def criterion_8():
    sc = gen_corpus(CorpusSpec(n_users=5, days_per_user=14, noise_sigma=0.0,
                               activity_peak_hour=18, weekend_activity_scale=0.8))
    peak = temporal_aggregate(sc.steps, BucketKind.HOUR_OF_DAY).argmax()
    ratio = weekend_weekday_ratio(temporal_aggregate(sc.steps, BucketKind.DAY_OF_WEEK))
    return peak == 18 and abs(ratio - 0.8) <= 0.01, f"hour_argmax={peak} weekend_ratio={ratio:.4f}"


def criterion_9():
    picks = []
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        centers = rng.normal(0, 3, (4, 48))
        X = np.vstack([c + rng.normal(0, 0.3, (40, 48)) for c in centers])
        report = k_sweep(X, "kmeans", range(2, 9), seed=seed)
        picks.append((report.chosen_k, report.elbow_k))
    ok = all(p == (4, 4) for p in picks)
    return ok, "(silhouette_k, elbow_k) per seed = " + " ".join(f"{a},{b}" for a, b in picks)


def _pipeline(root: Path) -> dict:
    c, m = root / "c", root / "m"
    steps = [
        ["synth", "--users", "12", "--days", "5", "--seed", "3", "--out", str(c)],
        ["cluster", "--algo", "som", "--in", str(c), "--out", str(m)],
        ["select-k", "--algo", "kshape", "--k-max", "5", "--jobs", "2", "--in", str(c), "--out", str(root / "s")],
        ["evaluate", "--model", str(m), "--truth", str(c / "labels.csv"), "--out", str(root / "e")],
        ["patterns", "--in", str(c), "--out", str(root / "p")],
        ["stats", "--in", str(c), "--out", str(root / "st")],
        ["report", "--in", str(c), "--truth", str(c / "labels.csv"), "--k-max", "4",
         "--iterations", "2000", "--out", str(root / "r")],
    ]
    for argv in steps:
        if cli_main(argv) != 0:
            raise RuntimeError(f"pipeline step failed: {argv[0]}")
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def criterion_10():
    X, _, users = three_pattern_corpus(0)
    grid = SomGrid.for_users(users)
    fits_equal = all(
        clustering.fit(a, X, k=3, seed=9, grid=grid).to_json()
        == clustering.fit(a, X, k=3, seed=9, grid=grid).to_json()
        for a in clustering.Algorithm)
    runs = []
    with tempfile.TemporaryDirectory() as tmp:
        for i in range(2):
            # same paths both times so run.log records identical argv
            root = Path(tmp) / "run"
            runs.append(_pipeline(root))
            if i == 0:
                shutil.rmtree(root)
    same = runs[0] == runs[1]
    return fits_equal and same, f"fits_identical={fits_equal} cli_files={len(runs[0])} identical={same}"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}


def run(i):
    if i not in RESULTS:
        RESULTS[i] = CRITERIA[i]()
    return RESULTS[i]


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, detail = run(number)
    assert ok, f"criterion {number}: {detail}"


def report_lines():
    return [f"criterion {i:2d}: {'PASS' if ok else 'FAIL'}  {detail}" for i, (ok, detail) in sorted(RESULTS.items())]


if __name__ == "__main__":
    for i in sorted(CRITERIA):
        run(i)
        print(report_lines()[-1], flush=True)
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
