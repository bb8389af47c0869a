"""Raw sensor records, per-user day slicing, fixed-grid resampling and normalization."""
from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO, Iterable, Mapping

import numpy as np

from .errors import (
    AlignmentError,
    EmptyDayError,
    InvalidRangeError,
    ParameterError,
    ParseError,
    RejectedRecordError,
)

log = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440
HR_LO = 31.0
HR_HI = 245.0
MS_PER_MINUTE = 60_000


class Kind(str, Enum):
    HEART_RATE = "hr"
    STEPS = "steps"


@dataclass(frozen=True)
class Sample:
    user_id: str
    timestamp: int  # epoch milliseconds, UTC
    kind: Kind
    value: float

    def __post_init__(self):
        if self.timestamp <= 0:
            raise ParameterError(f"timestamp must be positive, got {self.timestamp}")
        if not self.value >= 0:
            raise ParameterError(f"value must be non-negative, got {self.value}")


def check_offset(minutes: int) -> int:
    if not -720 <= minutes <= 840:
        raise ParameterError(f"utc offset {minutes} min outside [-720, 840]")
    return int(minutes)


@dataclass(frozen=True)
class DayWindow:
    """One local calendar day under a fixed UTC offset."""

    local_date: dt.date
    utc_offset_minutes: int = 0

    def __post_init__(self):
        check_offset(self.utc_offset_minutes)

    @classmethod
    def containing(cls, timestamp_ms: int, utc_offset_minutes: int = 0) -> "DayWindow":
        local = _local_datetime(timestamp_ms, utc_offset_minutes)
        return cls(local.date(), utc_offset_minutes)

    @property
    def start_ms(self) -> int:
        midnight = dt.datetime.combine(self.local_date, dt.time(), tzinfo=dt.timezone.utc)
        return int(midnight.timestamp()) * 1000 - self.utc_offset_minutes * MS_PER_MINUTE


def _local_datetime(timestamp_ms: int, utc_offset_minutes: int) -> dt.datetime:
    shifted = timestamp_ms + utc_offset_minutes * MS_PER_MINUTE
    return dt.datetime(1970, 1, 1) + dt.timedelta(milliseconds=shifted)


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FixedSeries:
    """One user-day on a fixed slot grid starting at local 00:00."""

    user_id: str
    local_date: dt.date
    slots: np.ndarray
    slot_minutes: int = 30
    coverage: float = 1.0
    normalized: bool = False
    kind: Kind = Kind.HEART_RATE
    observed: np.ndarray | None = None  # per-slot mask of slots backed by raw samples

    def __post_init__(self):
        object.__setattr__(self, "slots", _readonly(self.slots))
        if self.slot_minutes <= 0 or MINUTES_PER_DAY % self.slot_minutes:
            raise ParameterError(f"slot_minutes={self.slot_minutes} must divide 1440")
        if self.slots.shape != (MINUTES_PER_DAY // self.slot_minutes,):
            raise ParameterError(
                f"expected {MINUTES_PER_DAY // self.slot_minutes} slots, got {self.slots.shape}"
            )
        if not 0.0 <= self.coverage <= 1.0:
            raise ParameterError(f"coverage {self.coverage} outside [0, 1]")
        if self.normalized and (self.slots.min() < 0 or self.slots.max() > 1):
            raise ParameterError("normalized series has values outside [0, 1]")
        if self.observed is not None:
            mask = np.array(self.observed, dtype=bool)
            if mask.shape != self.slots.shape:
                raise ParameterError("observed mask must match slot count")
            mask.setflags(write=False)
            object.__setattr__(self, "observed", mask)

    @property
    def length(self) -> int:
        return len(self.slots)

    def __eq__(self, other):
        if not isinstance(other, FixedSeries):
            return NotImplemented
        return (
            (self.user_id, self.local_date, self.slot_minutes, self.coverage, self.normalized, self.kind)
            == (other.user_id, other.local_date, other.slot_minutes, other.coverage, other.normalized, other.kind)
            and np.array_equal(self.slots, other.slots)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SeriesFragment:
    """A contiguous hour range cut out of a :class:`FixedSeries`."""

    user_id: str
    local_date: dt.date
    slots: np.ndarray
    slot_minutes: int
    start_hour: int
    end_hour: int
    coverage: float
    normalized: bool

    def __post_init__(self):
        object.__setattr__(self, "slots", _readonly(self.slots))

    @property
    def hours(self) -> np.ndarray:
        """Slot start times in hours since the fragment start."""
        return np.arange(len(self.slots)) * self.slot_minutes / 60.0


@dataclass
class Corpus:
    series: list[FixedSeries]
    kind: Kind = Kind.HEART_RATE
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.series:
            lengths = {s.length for s in self.series}
            kinds = {s.kind for s in self.series}
            if len(lengths) > 1:
                raise ParameterError(f"series lengths differ: {sorted(lengths)}")
            if kinds != {self.kind}:
                raise ParameterError(f"series kinds {kinds} do not match corpus kind {self.kind}")

    def __len__(self):
        return len(self.series)

    @property
    def slot_minutes(self) -> int:
        return self.series[0].slot_minutes

    def matrix(self) -> np.ndarray:
        if not self.series:
            return np.empty((0, 0))
        return np.vstack([s.slots for s in self.series])

    def users(self) -> list[str]:
        return sorted({s.user_id for s in self.series})

    def keys(self) -> list[tuple[str, dt.date]]:
        return [(s.user_id, s.local_date) for s in self.series]

    def with_min_coverage(self, min_coverage: float = 0.5) -> "Corpus":
        kept = [s for s in self.series if s.coverage >= min_coverage]
        if len(kept) < len(self.series):
            log.info("dropped %d of %d days below coverage %.2f",
                     len(self.series) - len(kept), len(self.series), min_coverage)
        return Corpus(kept, self.kind, dict(self.meta))


# -- parsing -----------------------------------------------------------------

_KINDS = {"hr": Kind.HEART_RATE, "steps": Kind.STEPS}
_HEADER = ["user_id", "timestamp_ms", "kind", "value"]


def _make_sample(line: int, user_id, ts, kind, value) -> Sample:
    if not isinstance(user_id, str) or not user_id:
        raise ParseError(line, f"bad user_id {user_id!r}")
    try:
        if isinstance(ts, bool) or isinstance(ts, float):
            raise ValueError
        timestamp = int(ts)
    except (TypeError, ValueError):
        raise ParseError(line, f"malformed timestamp {ts!r}") from None
    try:
        val = float(value)
    except (TypeError, ValueError):
        raise ParseError(line, f"malformed value {value!r}") from None
    k = _KINDS.get(str(kind).strip().lower())
    if k is None:
        raise RejectedRecordError(line, f"unknown kind {kind!r}")
    try:
        return Sample(user_id, timestamp, k, val)
    except ParameterError as exc:
        raise ParseError(line, str(exc)) from None


def parse_samples(stream: bytes | str | IO, format: str = "csv") -> list[Sample]:
    """Parse CSV (``user_id,timestamp_ms,kind,value``) or JSON-lines records.

    A CSV header row is optional. Blank lines are skipped. Errors carry the
    1-based line number of the offending record.
    """
    if hasattr(stream, "read"):
        stream = stream.read()
    if isinstance(stream, bytes):
        try:
            stream = stream.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(0, f"input is not UTF-8: {exc}") from None
    lines = stream.splitlines()
    out = []
    if format == "csv":
        for lineno, row in enumerate(csv.reader(lines), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and [c.strip() for c in row] == _HEADER:
                continue
            if len(row) != 4:
                raise ParseError(lineno, f"expected 4 fields, got {len(row)}")
            user_id, ts, kind, value = (c.strip() for c in row)
            out.append(_make_sample(lineno, user_id, ts, kind, value))
    elif format == "jsonl":
        for lineno, text in enumerate(lines, start=1):
            if not text.strip():
                continue
            try:
                rec = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(rec, dict) or any(k not in rec for k in _HEADER):
                raise ParseError(lineno, f"record must be an object with keys {_HEADER}")
            out.append(_make_sample(lineno, rec["user_id"], rec["timestamp_ms"], rec["kind"], rec["value"]))
    else:
        raise ParameterError(f"unknown format {format!r}; expected csv or jsonl")
    return out


def write_samples_csv(samples: Iterable[Sample], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(_HEADER)
    for s in samples:
        w.writerow([s.user_id, s.timestamp, s.kind.value, repr(float(s.value))])


# -- day slicing and resampling ----------------------------------------------

def slice_days(samples: Iterable[Sample], offsets: Mapping[str, int] | int = 0,
               kind: Kind | None = None) -> dict[tuple[str, dt.date], list[Sample]]:
    """Bucket samples by ``(user_id, local_date)`` under each user's fixed UTC offset.

    ``offsets`` is either one offset for everyone or a per-user mapping
    (missing users default to 0). Samples inside a bucket are time-sorted.
    """
    buckets: dict[tuple[str, dt.date], list[Sample]] = {}
    for s in samples:
        if kind is not None and s.kind != kind:
            continue
        off = offsets if isinstance(offsets, int) else offsets.get(s.user_id, 0)
        day = DayWindow.containing(s.timestamp, check_offset(off)).local_date
        buckets.setdefault((s.user_id, day), []).append(s)
    for v in buckets.values():
        v.sort(key=lambda s: s.timestamp)
    return dict(sorted(buckets.items()))


def resample(day_samples: list[Sample], slot_minutes: int = 30, utc_offset_minutes: int = 0,
             agg: str | None = None) -> FixedSeries:
    """Average samples into fixed slots and fill the gaps.

    Interior gaps are linearly interpolated, leading and trailing gaps take
    the nearest filled value. ``agg`` defaults to ``"mean"`` for heart rate
    and ``"sum"`` for step counts.
    """
    if slot_minutes <= 0 or MINUTES_PER_DAY % slot_minutes:
        raise ParameterError(f"slot_minutes={slot_minutes} must divide 1440")
    if not day_samples:
        raise EmptyDayError("no samples for this day")
    first = day_samples[0]
    window = DayWindow.containing(first.timestamp, check_offset(utc_offset_minutes))
    if any(s.user_id != first.user_id or s.kind != first.kind for s in day_samples):
        raise ParameterError("day samples must share user and kind")
    if agg is None:
        agg = "sum" if first.kind == Kind.STEPS else "mean"
    if agg not in ("mean", "sum"):
        raise ParameterError(f"unknown aggregation {agg!r}")

    n_slots = MINUTES_PER_DAY // slot_minutes
    start = window.start_ms
    sums = np.zeros(n_slots)
    counts = np.zeros(n_slots, dtype=int)
    for s in day_samples:
        minute = (s.timestamp - start) // MS_PER_MINUTE
        if not 0 <= minute < MINUTES_PER_DAY:
            raise ParameterError(f"sample at {s.timestamp} is not on local day {window.local_date}")
        idx = int(minute // slot_minutes)
        sums[idx] += s.value
        counts[idx] += 1
    filled = counts > 0
    if not filled.any():
        raise EmptyDayError("all slots empty")
    values = np.where(filled, sums / np.maximum(counts, 1), 0.0) if agg == "mean" else sums
    idx = np.flatnonzero(filled)
    slots = np.interp(np.arange(n_slots), idx, values[idx])
    return FixedSeries(first.user_id, window.local_date, slots, slot_minutes,
                       coverage=float(filled.mean()), kind=first.kind, observed=filled)


def series_to_samples(series: FixedSeries, utc_offset_minutes: int = 0) -> list[Sample]:
    """Emit one sample at each slot start; the inverse of :func:`resample` on a full grid."""
    start = DayWindow(series.local_date, utc_offset_minutes).start_ms
    step = series.slot_minutes * MS_PER_MINUTE
    return [Sample(series.user_id, start + i * step, series.kind, float(v))
            for i, v in enumerate(series.slots)]


def normalize(series: FixedSeries, lo: float = HR_LO, hi: float = HR_HI) -> FixedSeries:
    """Affine map ``[lo, hi] -> [0, 1]``; out-of-range values are clamped."""
    if not lo < hi:
        raise InvalidRangeError(f"need lo < hi, got lo={lo}, hi={hi}")
    if series.normalized:
        raise ParameterError("series is already normalized")
    scaled = np.clip((series.slots - lo) / (hi - lo), 0.0, 1.0)
    return replace(series, slots=scaled, normalized=True)


def denormalize(series: FixedSeries, lo: float = HR_LO, hi: float = HR_HI) -> FixedSeries:
    if not lo < hi:
        raise InvalidRangeError(f"need lo < hi, got lo={lo}, hi={hi}")
    return replace(series, slots=lo + series.slots * (hi - lo), normalized=False)


def window_slice(series: FixedSeries, start_hour: int, end_hour: int) -> SeriesFragment:
    """Slots covering local hours ``[start_hour, end_hour)``."""
    if not 0 <= start_hour < end_hour <= 24:
        raise ParameterError(f"need 0 <= start < end <= 24, got {start_hour}, {end_hour}")
    a, b = start_hour * 60, end_hour * 60
    if a % series.slot_minutes or b % series.slot_minutes:
        raise AlignmentError(
            f"hours {start_hour}-{end_hour} do not align to {series.slot_minutes}-minute slots")
    i, j = a // series.slot_minutes, b // series.slot_minutes
    if series.observed is not None:
        coverage = float(series.observed[i:j].mean())
    else:
        coverage = series.coverage
    return SeriesFragment(series.user_id, series.local_date, series.slots[i:j], series.slot_minutes,
                          start_hour, end_hour, coverage, series.normalized)


@dataclass(frozen=True)
class NightShiftResult:
    retained: frozenset[str]
    excluded: frozenset[str]
    unevaluated: frozenset[str]  # retained, but no activity data to judge


def night_shift_filter(users: Iterable[str], steps: Iterable[FixedSeries], threshold_steps: float = 500,
                       day_fraction: float = 0.5, night_hours: tuple[int, int] = (0, 8)) -> NightShiftResult:
    """Split users into those kept and those active during the night window.

    A user is excluded when their summed night-window steps exceed
    ``threshold_steps`` on at least ``day_fraction`` of their recorded days.
    Step series are expected to hold per-slot counts.
    """
    if not 0 < day_fraction <= 1:
        raise ParameterError(f"day_fraction must lie in (0, 1], got {day_fraction}")
    nights: dict[str, list[float]] = {}
    for s in steps:
        frag = window_slice(s, *night_hours)
        nights.setdefault(s.user_id, []).append(float(frag.slots.sum()))
    retained, excluded, unevaluated = set(), set(), set()
    for u in users:
        totals = nights.get(u)
        if not totals:
            log.warning("user %s has no activity data; retained unevaluated", u)
            retained.add(u)
            unevaluated.add(u)
            continue
        active = sum(t > threshold_steps for t in totals)
        (excluded if active >= day_fraction * len(totals) else retained).add(u)
    return NightShiftResult(frozenset(retained), frozenset(excluded), frozenset(unevaluated))


# -- corpus CSV ----------------------------------------------------------------

def write_corpus_csv(corpus: Corpus, fh: IO[str]) -> None:
    """``user_id,date,slot_0..slot_{L-1},coverage``; floats written with full precision."""
    w = csv.writer(fh, lineterminator="\n")
    n = corpus.series[0].length if corpus.series else 0
    w.writerow(["user_id", "date", *(f"slot_{i}" for i in range(n)), "coverage"])
    for s in corpus.series:
        w.writerow([s.user_id, s.local_date.isoformat(), *(repr(float(v)) for v in s.slots),
                    repr(float(s.coverage))])


def read_corpus_csv(fh: IO[str] | str, kind: Kind = Kind.HEART_RATE, normalized: bool = False) -> Corpus:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        return Corpus([], kind)
    n = len(header) - 3
    if n <= 0 or header[:2] != ["user_id", "date"] or header[-1] != "coverage":
        raise ParseError(1, "bad corpus header")
    slot_minutes = MINUTES_PER_DAY // n
    series = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
        try:
            day = dt.date.fromisoformat(row[1])
            values = [float(v) for v in row[2:-1]]
            coverage = float(row[-1])
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        series.append(FixedSeries(row[0], day, values, slot_minutes, coverage, normalized, kind))
    return Corpus(series, kind)
