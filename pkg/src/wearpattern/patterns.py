"""Categorical heart-rate curve shapes for the sleep and daytime windows."""
from __future__ import annotations

import csv
import datetime as dt
import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Mapping

import numpy as np

from .errors import EmptyCohortError, InsufficientDataError, ParameterError
from .timeseries import Corpus, SeriesFragment, window_slice

log = logging.getLogger(__name__)

SLEEP_WINDOW = (0, 8)
DAY_WINDOW = (6, 24)
SMOOTHING_RADIUS = 1
SLOPE_TOL = 0.02
POSITION_BAND = 0.25
MIN_COVERAGE = 0.5


class PatternLabel(str, Enum):
    VALLEY = "Valley"
    DOWNWARD = "Downward"
    PEAK = "Peak"
    UPWARD = "Upward"
    UNCLASSIFIED = "Unclassified"


# tie-break order for majority votes, and the column order of distributions
PRECEDENCE = (PatternLabel.VALLEY, PatternLabel.DOWNWARD, PatternLabel.PEAK,
              PatternLabel.UPWARD, PatternLabel.UNCLASSIFIED)


def smooth(values, radius: int) -> np.ndarray:
    """Centered moving average; windows shrink at the edges."""
    values = np.asarray(values, dtype=float)
    if radius <= 0:
        return values.copy()
    kernel = np.ones(2 * radius + 1)
    total = np.convolve(values, kernel, mode="same")
    count = np.convolve(np.ones_like(values), kernel, mode="same")
    return total / count


def _prepare(window, slot_minutes, min_coverage):
    if isinstance(window, SeriesFragment):
        if window.coverage < min_coverage:
            raise InsufficientDataError(
                f"window coverage {window.coverage:.2f} below {min_coverage:.2f}")
        values, slot_minutes = window.slots, window.slot_minutes
    else:
        values = np.asarray(window, dtype=float)
        if slot_minutes is None:
            raise ParameterError("slot_minutes required for a bare array window")
    if values.size < 3:
        raise InsufficientDataError("window needs at least three slots")
    return values, slot_minutes


def _rescale(values):
    """Min-max map to [0, 1]; ``None`` for a flat curve."""
    lo, hi = values.min(), values.max()
    span = hi - lo
    if span <= 1e-12 * max(1.0, abs(hi)):
        return None
    return (values - lo) / span


def slope_per_hour(values, slot_minutes: int) -> float:
    t = np.arange(len(values)) * slot_minutes / 60.0
    tc = t - t.mean()
    return float(tc @ (values - values.mean()) / (tc @ tc))


def classify_sleep_pattern(window, smoothing_radius: int = SMOOTHING_RADIUS, slope_tol: float = SLOPE_TOL,
                           position_band: float = POSITION_BAND, *, slot_minutes: int | None = None,
                           min_coverage: float = MIN_COVERAGE) -> PatternLabel:
    """Label a sleep-window curve as Peak, Valley, Downward or Unclassified.

    The curve is smoothed and min-max rescaled, so ``slope_tol`` is in units
    of the curve's own range. Rules are tried in this order:

    * Peak: the maximum sits in the central band and rises at least
      ``slope_tol`` above both endpoints.
    * Valley: the minimum sits in the central band and both endpoints rise at
      least ``slope_tol`` above it.
    * Downward: the fitted slope is at most ``-slope_tol`` per hour and the
      minimum sits in the final band.

    Peak is checked before Downward because a hump that decays into the
    morning also has a falling trend.
    """
    values, slot_minutes = _prepare(window, slot_minutes, min_coverage)
    if not 0 <= position_band < 0.5:
        raise ParameterError("position_band must lie in [0, 0.5)")
    y = _rescale(smooth(values, smoothing_radius))
    if y is None:
        return PatternLabel.UNCLASSIFIED
    n = len(y)
    pos = lambda i: (i + 0.5) / n  # noqa: E731  slot-centre position in the window
    central = lambda i: position_band <= pos(i) <= 1 - position_band  # noqa: E731
    imax, imin = int(y.argmax()), int(y.argmin())
    if central(imax) and y[imax] - max(y[0], y[-1]) >= slope_tol:
        return PatternLabel.PEAK
    if central(imin) and min(y[0], y[-1]) - y[imin] >= slope_tol:
        return PatternLabel.VALLEY
    if slope_per_hour(y, slot_minutes) <= -slope_tol and pos(imin) >= 1 - position_band:
        return PatternLabel.DOWNWARD
    return PatternLabel.UNCLASSIFIED


def classify_day_trend(window, slope_tol: float = SLOPE_TOL, *, slot_minutes: int | None = None,
                       min_coverage: float = MIN_COVERAGE) -> PatternLabel:
    """Upward / Downward by the least-squares slope of the rescaled curve."""
    values, slot_minutes = _prepare(window, slot_minutes, min_coverage)
    y = _rescale(values)
    if y is None:
        return PatternLabel.UNCLASSIFIED
    slope = slope_per_hour(y, slot_minutes)
    if slope >= slope_tol:
        return PatternLabel.UPWARD
    if slope <= -slope_tol:
        return PatternLabel.DOWNWARD
    return PatternLabel.UNCLASSIFIED


def user_majority_pattern(labels: Iterable[PatternLabel]) -> PatternLabel:
    """Most frequent label; ties resolved Valley > Downward > Peak > Upward > Unclassified."""
    counts = Counter(PatternLabel(lab) for lab in labels)
    if not counts:
        raise ParameterError("need at least one labelled day")
    top = max(counts.values())
    return next(lab for lab in PRECEDENCE if counts.get(lab) == top)


def season_of(day: dt.date) -> str:
    return {12: "winter", 1: "winter", 2: "winter", 3: "spring", 4: "spring", 5: "spring",
            6: "summer", 7: "summer", 8: "summer"}.get(day.month, "fall")


def is_weekend(day: dt.date) -> bool:
    return day.weekday() == 6  # Sunday only


COHORTS = ("all", "winter", "spring", "summer", "fall", "weekday", "weekend")


def in_cohort(day: dt.date, cohort: str) -> bool:
    if cohort == "all":
        return True
    if cohort == "weekend":
        return is_weekend(day)
    if cohort == "weekday":
        return not is_weekend(day)
    if cohort in ("winter", "spring", "summer", "fall"):
        return season_of(day) == cohort
    raise ParameterError(f"unknown cohort {cohort!r}; expected one of {COHORTS}")


@dataclass(frozen=True)
class PatternDistribution:
    fractions: dict[PatternLabel, float]
    cohort: str
    n: int  # users in the cohort


def pattern_distribution(labels: Mapping, cohort: str = "all") -> PatternDistribution:
    """Share of users per label within a cohort.

    ``labels`` maps either ``(user_id, date)`` to a per-day label, in which
    case days are filtered to the cohort and each user contributes their
    majority label, or ``user_id`` to an already-aggregated label (cohort
    ``"all"`` only).
    """
    per_user: dict[str, list[PatternLabel]] = {}
    for key, lab in labels.items():
        if isinstance(key, tuple):
            user, day = key
            if not in_cohort(day, cohort):
                continue
        else:
            if cohort != "all":
                raise ParameterError("user-level labels carry no dates; only cohort 'all' applies")
            user = key
        per_user.setdefault(user, []).append(PatternLabel(lab))
    if not per_user:
        raise EmptyCohortError(f"no users in cohort {cohort!r}")
    votes = Counter(user_majority_pattern(v) for v in per_user.values())
    n = len(per_user)
    return PatternDistribution({lab: votes.get(lab, 0) / n for lab in PRECEDENCE}, cohort, n)


def cross_tab(sleep: Mapping, day: Mapping) -> dict[tuple[PatternLabel, PatternLabel], int]:
    """Counts of (sleep label, day label) over keys present in both maps."""
    out: Counter = Counter()
    for key, s in sleep.items():
        if key in day:
            out[(PatternLabel(s), PatternLabel(day[key]))] += 1
    return dict(out)


def classify_corpus(corpus: Corpus, smoothing_radius: int = SMOOTHING_RADIUS, slope_tol: float = SLOPE_TOL,
                    position_band: float = POSITION_BAND, min_coverage: float = MIN_COVERAGE):
    """Sleep and daytime labels for every normalized day; days lacking coverage are skipped."""
    sleep, day = {}, {}
    for s in corpus.series:
        key = (s.user_id, s.local_date)
        try:
            sleep[key] = classify_sleep_pattern(window_slice(s, *SLEEP_WINDOW), smoothing_radius, slope_tol,
                                                position_band, min_coverage=min_coverage)
            day[key] = classify_day_trend(window_slice(s, *DAY_WINDOW), slope_tol, min_coverage=min_coverage)
        except InsufficientDataError as exc:
            log.info("skipping %s %s: %s", s.user_id, s.local_date, exc)
    return sleep, day


def write_distributions_csv(dists: Iterable[PatternDistribution], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["cohort", "label", "fraction", "n"])
    for d in dists:
        for lab, frac in d.fractions.items():
            w.writerow([d.cohort, lab.value, repr(float(frac)), d.n])
