"""Two-sample KS gate, correlation coefficients and calendar aggregation profiles."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import IO, NamedTuple

import numpy as np
from scipy import stats as sps
from scipy.special import kolmogorov

from .errors import DimensionError, ParameterError, UndefinedCorrelationError
from .timeseries import Corpus

EXACT_MAX_N = 20


class KsResult(NamedTuple):
    d_statistic: float
    p_value: float
    n1: int
    n2: int
    method: str


def _sample(x, name):
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ParameterError(f"{name} is empty")
    return x


def ks_statistic(a, b) -> float:
    """Largest gap between the two empirical CDFs, checked at every pooled value."""
    a, b = np.sort(a), np.sort(b)
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def ks_permutation_p(a, b) -> float:
    """Exact permutation p-value: share of all splits of the pooled sample with D >= observed."""
    a, b = _sample(a, "sample_a"), _sample(b, "sample_b")
    n1, n = a.size, a.size + b.size
    if n > EXACT_MAX_N:
        raise ParameterError(f"exact p limited to n1 + n2 <= {EXACT_MAX_N}")
    d_obs = ks_statistic(a, b)
    pool = np.sort(np.concatenate([a, b]))
    # positions where a run of tied values ends; the ECDFs only change there
    ends = np.flatnonzero(np.append(pool[1:] != pool[:-1], True))
    combos = np.array(list(itertools.combinations(range(n), n1)), dtype=np.intp)
    mask = np.zeros((len(combos), n), dtype=bool)
    mask[np.arange(len(combos))[:, None], combos] = True
    ca = np.cumsum(mask, axis=1)[:, ends] / n1
    cb = np.cumsum(~mask, axis=1)[:, ends] / (n - n1)
    d = np.abs(ca - cb).max(axis=1)
    return float(np.mean(d >= d_obs - 1e-12))


def ks_test(sample_a, sample_b, exact: bool = False) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test.

    The default p-value is the Kolmogorov tail at ``sqrt(n_eff) * D`` with
    ``n_eff = n1 n2 / (n1 + n2)``. ``exact=True`` (``n1 + n2 <= 20``)
    enumerates every split of the pooled sample instead.
    """
    a, b = _sample(sample_a, "sample_a"), _sample(sample_b, "sample_b")
    d = ks_statistic(a, b)
    if exact:
        return KsResult(d, ks_permutation_p(a, b), a.size, b.size, "exact")
    en = a.size * b.size / (a.size + b.size)
    p = float(min(max(kolmogorov(math.sqrt(en) * d), 0.0), 1.0))
    return KsResult(d, p, a.size, b.size, "asymptotic")


# -- correlations ---------------------------------------------------------------

def _xy(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise ParameterError("correlations need at least three points")
    return x, y


def pearson(x, y) -> float:
    x, y = _xy(x, y)
    xc, yc = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0:
        raise UndefinedCorrelationError("pearson undefined for a constant input")
    return float(np.clip(xc @ yc / denom, -1.0, 1.0))


def spearman(x, y) -> float:
    x, y = _xy(x, y)
    try:
        return pearson(sps.rankdata(x), sps.rankdata(y))
    except UndefinedCorrelationError:
        raise UndefinedCorrelationError("spearman undefined for a constant input") from None


def kendall_tau(x, y) -> float:
    """Kendall tau-b (tie-corrected)."""
    x, y = _xy(x, y)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("kendall tau undefined for a constant input")
    return float(sps.kendalltau(x, y, variant="b").statistic)


class Correlations(NamedTuple):
    pearson: float | None
    spearman: float | None
    kendall_tau: float | None
    undefined: tuple[str, ...] = ()


def correlations(x, y) -> Correlations:
    """All three coefficients; an undefined one is ``None`` and named in ``undefined``."""
    vals, bad = {}, []
    for name, fn in (("pearson", pearson), ("spearman", spearman), ("kendall_tau", kendall_tau)):
        try:
            vals[name] = fn(x, y)
        except UndefinedCorrelationError:
            vals[name] = None
            bad.append(name)
    return Correlations(vals["pearson"], vals["spearman"], vals["kendall_tau"], tuple(bad))


# -- temporal profiles -------------------------------------------------------------

class BucketKind(str, Enum):
    HOUR_OF_DAY = "hour"
    DAY_OF_WEEK = "weekday"
    DAY_OF_MONTH = "monthday"
    MONTH_OF_YEAR = "month"


DOMAINS = {
    BucketKind.HOUR_OF_DAY: range(24),
    BucketKind.DAY_OF_WEEK: range(7),  # Monday = 0 ... Sunday = 6
    BucketKind.DAY_OF_MONTH: range(1, 32),
    BucketKind.MONTH_OF_YEAR: range(1, 13),
}


class BucketStats(NamedTuple):
    mean: float
    std: float
    n: int


@dataclass
class _Moments:
    """Count, mean and sum of squared deviations; merges associatively (Chan et al.)."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, values: np.ndarray) -> None:
        if values.size:
            self.merge(_Moments(values.size, float(values.mean()), float(((values - values.mean()) ** 2).sum())))

    def merge(self, other: "_Moments") -> None:
        if other.n == 0:
            return
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / n
        self.m2 += other.m2 + delta * delta * self.n * other.n / n
        self.n = n


@dataclass
class TemporalProfile:
    kind: BucketKind
    buckets: dict[int, BucketStats]

    def argmax(self) -> int:
        filled = {b: s.mean for b, s in self.buckets.items() if s.n}
        return max(filled, key=lambda b: (filled[b], -b))

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bucket", "mean", "std", "n"])
        for b, s in self.buckets.items():
            w.writerow([b, repr(s.mean), repr(s.std), s.n])


def _bucket_keys(series, kind):
    if kind is BucketKind.HOUR_OF_DAY:
        return np.arange(series.length) * series.slot_minutes // 60
    day = series.local_date
    key = {BucketKind.DAY_OF_WEEK: day.weekday(), BucketKind.DAY_OF_MONTH: day.day,
           BucketKind.MONTH_OF_YEAR: day.month}[kind]
    return np.full(series.length, key)


def temporal_aggregate(corpus: Corpus, kind: BucketKind) -> TemporalProfile:
    """Mean, population std and count of slot values per calendar bucket.

    Every slot value is one observation, placed by its local time. Values are
    used as stored, so pass a raw (non-normalized) corpus.
    """
    kind = BucketKind(kind)
    if not corpus.series:
        raise ParameterError("corpus is empty")
    acc = {b: _Moments() for b in DOMAINS[kind]}
    for s in corpus.series:
        keys = _bucket_keys(s, kind)
        for b in np.unique(keys):
            acc[int(b)].add(s.slots[keys == b])
    buckets = {
        b: BucketStats(m.mean if m.n else float("nan"), math.sqrt(m.m2 / m.n) if m.n else float("nan"), m.n)
        for b, m in acc.items()
    }
    return TemporalProfile(kind, buckets)


def weekend_weekday_ratio(profile: TemporalProfile) -> float:
    """Sunday bucket mean over the pooled Monday-Saturday mean."""
    if profile.kind is not BucketKind.DAY_OF_WEEK:
        raise ParameterError("needs a day-of-week profile")
    week = [profile.buckets[d] for d in range(6) if profile.buckets[d].n]
    sunday = profile.buckets[6]
    if not week or not sunday.n:
        raise ParameterError("profile lacks weekday or Sunday data")
    pooled = sum(s.mean * s.n for s in week) / sum(s.n for s in week)
    return sunday.mean / pooled


def gated_comparison(group_a, group_b, alpha: float = 0.05) -> dict:
    """Mean difference ``b - a``, reported only when the KS test rejects at ``alpha``.

    Insignificant comparisons keep their test statistics but carry
    ``difference=None`` and ``suppressed=True``.
    """
    a, b = _sample(group_a, "group_a"), _sample(group_b, "group_b")
    res = ks_test(a, b)
    significant = bool(res.p_value < alpha)
    return {
        "mean_a": float(a.mean()),
        "mean_b": float(b.mean()),
        "n_a": int(a.size),
        "n_b": int(b.size),
        "ks_d": res.d_statistic,
        "p_value": res.p_value,
        "alpha": alpha,
        "significant": significant,
        "difference": float(b.mean() - a.mean()) if significant else None,
        "suppressed": not significant,
    }


def heart_rate_bands(values, low: float = 60.0, high: float = 100.0) -> dict:
    """Shares of values below, inside and above the ``[low, high]`` band."""
    v = _sample(values, "values")
    return {
        "below": float((v < low).mean()),
        "normal": float(((v >= low) & (v <= high)).mean()),
        "above": float((v > high).mean()),
        "n": int(v.size),
    }
