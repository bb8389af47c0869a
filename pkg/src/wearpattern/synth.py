"""Deterministic labelled wearable corpora with planted sleep patterns and activity profiles."""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .errors import ParameterError
from .patterns import PRECEDENCE, PatternLabel
from .timeseries import (
    MINUTES_PER_DAY,
    Corpus,
    FixedSeries,
    Kind,
    Sample,
    denormalize,
    series_to_samples,
)

DEFAULT_SLEEP_MIX = {
    PatternLabel.VALLEY: 0.44,
    PatternLabel.DOWNWARD: 0.295,
    PatternLabel.PEAK: 0.263,
    PatternLabel.UNCLASSIFIED: 0.002,
}
SLEEP_PATTERNS = (PatternLabel.VALLEY, PatternLabel.DOWNWARD, PatternLabel.PEAK, PatternLabel.UNCLASSIFIED)

# activity profile, steps per hour
ACTIVE_HOURS = (7, 23)
ACTIVE_BASE = 200.0
PEAK_STEPS = 1500.0
PEAK_WIDTH_H = 1.5
NIGHT_SHIFT_STEPS = 1200.0


@dataclass(frozen=True)
class CorpusSpec:
    n_users: int = 100
    days_per_user: int = 14
    pattern_mix: dict = field(default_factory=lambda: dict(DEFAULT_SLEEP_MIX))
    noise_sigma: float = 0.02  # normalized heart-rate units; activity gets 10x this as relative noise
    cadence_minutes: int = 30
    activity_peak_hour: int = 18
    weekend_activity_scale: float = 0.8
    seed: int = 0
    start_date: dt.date = dt.date(2021, 1, 4)
    user_offset: float = 0.03  # per-user heart-rate shift drawn from U(-user_offset, user_offset)
    night_active_fraction: float = 0.0

    def __post_init__(self):
        mix = {PatternLabel(k): float(v) for k, v in self.pattern_mix.items()}
        object.__setattr__(self, "pattern_mix", mix)
        if self.n_users < 1 or self.days_per_user < 1:
            raise ParameterError("need at least one user and one day")
        if any(v < 0 for v in mix.values()) or not math.isclose(sum(mix.values()), 1.0, abs_tol=1e-9):
            raise ParameterError(f"pattern_mix must be non-negative and sum to 1, got {mix}")
        bad = set(mix) - set(SLEEP_PATTERNS)
        if bad:
            raise ParameterError(f"not sleep patterns: {sorted(b.value for b in bad)}")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be non-negative")
        if self.cadence_minutes not in (10, 30, 60):
            raise ParameterError("cadence_minutes must be 10, 30 or 60")
        if not 0 <= self.activity_peak_hour <= 23:
            raise ParameterError("activity_peak_hour must lie in [0, 23]")
        if not 0 < self.weekend_activity_scale <= 1:
            raise ParameterError("weekend_activity_scale must lie in (0, 1]")
        if not 0 <= self.night_active_fraction <= 1:
            raise ParameterError("night_active_fraction must lie in [0, 1]")
        if self.user_offset < 0:
            raise ParameterError("user_offset must be non-negative")


# -- templates (normalized heart-rate units) ------------------------------------

def sleep_template(pattern: PatternLabel, hours: np.ndarray) -> np.ndarray:
    """Sleep-window curve over local hours in ``[0, 8)``."""
    pattern = PatternLabel(pattern)
    if pattern is PatternLabel.VALLEY:
        # raised-cosine dip bottoming out at 04:00
        return 0.55 - 0.25 * 0.5 * (1 + np.cos(np.pi * (hours - 4.0) / 4.0))
    if pattern is PatternLabel.DOWNWARD:
        return 0.55 - 0.25 * hours / 8.0
    if pattern is PatternLabel.PEAK:
        # bump over 01:00-03:00 on a declining baseline
        return 0.40 + 0.25 * np.exp(-((hours - 2.0) ** 2) / (2 * 0.6 ** 2)) - 0.10 * hours / 8.0
    if pattern is PatternLabel.UNCLASSIFIED:
        return np.full_like(hours, 0.45)
    raise ParameterError(f"{pattern.value} is not a sleep pattern")


def day_template(trend: PatternLabel, hours: np.ndarray) -> np.ndarray:
    """Daytime ramp over local hours in ``[8, 24)``."""
    frac = (hours - 8.0) / 16.0
    if trend is PatternLabel.UPWARD:
        return 0.45 + 0.20 * frac
    if trend is PatternLabel.DOWNWARD:
        return 0.55 - 0.35 * frac
    raise ParameterError(f"{PatternLabel(trend).value} is not a daytime trend")


def day_trend_for(pattern: PatternLabel) -> PatternLabel:
    """Daytime trend attached to a sleep pattern: Peak sleepers trend down, the rest up."""
    return PatternLabel.DOWNWARD if pattern is PatternLabel.PEAK else PatternLabel.UPWARD


def daily_template(pattern: PatternLabel, slot_minutes: int = 30) -> np.ndarray:
    hours = np.arange(MINUTES_PER_DAY // slot_minutes) * slot_minutes / 60.0
    night = hours < 8.0
    out = np.empty_like(hours)
    out[night] = sleep_template(pattern, hours[night])
    out[~night] = day_template(day_trend_for(PatternLabel(pattern)), hours[~night])
    return out


def activity_profile(slot_minutes: int, peak_hour: int) -> np.ndarray:
    """Expected steps per slot: a waking-hours floor plus a bump centred inside ``peak_hour``."""
    hours = np.arange(MINUTES_PER_DAY // slot_minutes) * slot_minutes / 60.0
    mid = hours + slot_minutes / 120.0
    d = np.abs(mid - (peak_hour + 0.5))
    d = np.minimum(d, 24.0 - d)
    awake = (hours >= ACTIVE_HOURS[0]) & (hours < ACTIVE_HOURS[1])
    per_hour = np.where(awake, ACTIVE_BASE, 0.0) + PEAK_STEPS * np.exp(-d ** 2 / (2 * PEAK_WIDTH_H ** 2))
    return per_hour * slot_minutes / 60.0


# -- generation -------------------------------------------------------------------

def _day_rng(spec: CorpusSpec, user_index: int, day: int, stream: int):
    return np.random.default_rng([spec.seed, user_index, day, stream])


def _user_offset(spec: CorpusSpec, user_index: int) -> float:
    if spec.user_offset == 0:
        return 0.0
    return float(np.random.default_rng([spec.seed, user_index]).uniform(-spec.user_offset, spec.user_offset))


def user_id(index: int) -> str:
    return f"u{index:04d}"


def gen_user(pattern: PatternLabel, spec: CorpusSpec, user_index: int) -> list[FixedSeries]:
    """Normalized heart-rate days: template + per-user offset + i.i.d. Gaussian noise."""
    pattern = PatternLabel(pattern)
    if pattern not in SLEEP_PATTERNS:
        raise ParameterError(f"{pattern.value} is not a sleep pattern")
    base = daily_template(pattern, spec.cadence_minutes) + _user_offset(spec, user_index)
    out = []
    for day in range(spec.days_per_user):
        values = base
        if spec.noise_sigma > 0:
            values = base + _day_rng(spec, user_index, day, 0).normal(0.0, spec.noise_sigma, base.shape)
        out.append(FixedSeries(user_id(user_index), spec.start_date + dt.timedelta(days=day),
                               np.clip(values, 0.0, 1.0), spec.cadence_minutes, 1.0, True, Kind.HEART_RATE))
    return out


def gen_activity(spec: CorpusSpec, user_index: int, night_active: bool = False) -> list[FixedSeries]:
    """Step counts per slot with the diurnal peak, Sunday scaling and multiplicative noise."""
    profile = activity_profile(spec.cadence_minutes, spec.activity_peak_hour)
    if night_active:
        hours = np.arange(len(profile)) * spec.cadence_minutes / 60.0
        profile = profile + np.where(hours < 8.0, NIGHT_SHIFT_STEPS * spec.cadence_minutes / 60.0, 0.0)
    level = float(np.random.default_rng([spec.seed, user_index, 1]).uniform(0.7, 1.3)) if spec.noise_sigma else 1.0
    out = []
    for day in range(spec.days_per_user):
        date = spec.start_date + dt.timedelta(days=day)
        values = level * profile * (spec.weekend_activity_scale if date.weekday() == 6 else 1.0)
        if spec.noise_sigma > 0:
            rel = _day_rng(spec, user_index, day, 1).normal(0.0, 10 * spec.noise_sigma, values.shape)
            values = np.maximum(values * (1.0 + rel), 0.0)
        out.append(FixedSeries(user_id(user_index), date, values, spec.cadence_minutes, 1.0, False, Kind.STEPS))
    return out


def largest_remainder(n: int, mix: dict) -> dict[PatternLabel, int]:
    """Integer counts summing to ``n``; leftovers go to the largest fractional parts.

    Ties between equal remainders follow the label precedence order.
    """
    labels = [lab for lab in PRECEDENCE if lab in mix]
    quotas = {lab: n * mix[lab] for lab in labels}
    counts = {lab: int(math.floor(q + 1e-9)) for lab, q in quotas.items()}
    left = n - sum(counts.values())
    ranked = sorted(labels, key=lambda lab: -(quotas[lab] - counts[lab]))
    for lab in ranked[:left]:
        counts[lab] += 1
    return counts


@dataclass
class SyntheticCorpus:
    spec: CorpusSpec
    hr: Corpus  # normalized heart rate
    steps: Corpus  # raw step counts per slot
    planted: dict[str, PatternLabel]
    day_trend: dict[str, PatternLabel]
    night_active: frozenset[str]

    def truth_for(self, corpus: Corpus | None = None) -> list[PatternLabel]:
        corpus = corpus or self.hr
        return [self.planted[s.user_id] for s in corpus.series]

    def samples(self, lo: float = 31.0, hi: float = 245.0, utc_offset_minutes: int = 0) -> list[Sample]:
        """Raw samples (bpm and steps) at every slot start, user by user."""
        out = []
        for s in self.hr.series:
            out.extend(series_to_samples(denormalize(s, lo, hi), utc_offset_minutes))
        for s in self.steps.series:
            out.extend(series_to_samples(s, utc_offset_minutes))
        return out


def gen_corpus(spec: CorpusSpec) -> SyntheticCorpus:
    counts = largest_remainder(spec.n_users, spec.pattern_mix)
    assignment = [lab for lab in PRECEDENCE if lab in counts for _ in range(counts[lab])]
    order = np.random.default_rng([spec.seed, 2**31 - 1]).permutation(spec.n_users)
    patterns = [assignment[i] for i in order]
    n_night = int(round(spec.night_active_fraction * spec.n_users))
    night = {user_id(i) for i in range(n_night)}
    hr, steps, planted, trend = [], [], {}, {}
    for i, pattern in enumerate(patterns):
        hr.extend(gen_user(pattern, spec, i))
        steps.extend(gen_activity(spec, i, user_id(i) in night))
        planted[user_id(i)] = pattern
        trend[user_id(i)] = day_trend_for(pattern)
    return SyntheticCorpus(spec, Corpus(hr, Kind.HEART_RATE), Corpus(steps, Kind.STEPS),
                           planted, trend, frozenset(night))


def write_labels_csv(planted: dict[str, PatternLabel], fh: IO[str], column: str = "planted_pattern") -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["user_id", column])
    for u in sorted(planted):
        w.writerow([u, PatternLabel(planted[u]).value])


def read_labels_csv(fh: IO[str]) -> dict[str, str]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if not header or len(header) < 2 or header[0] != "user_id":
        raise ParameterError("labels CSV needs a user_id,<label> header")
    return {row[0]: row[1] for row in reader if row}
