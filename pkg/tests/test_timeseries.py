import datetime as dt
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wearpattern.errors import (
    AlignmentError,
    EmptyDayError,
    InvalidRangeError,
    ParameterError,
    ParseError,
)
from wearpattern.timeseries import (
    Corpus,
    DayWindow,
    FixedSeries,
    Kind,
    Sample,
    denormalize,
    night_shift_filter,
    normalize,
    parse_samples,
    read_corpus_csv,
    resample,
    series_to_samples,
    slice_days,
    window_slice,
    write_corpus_csv,
    write_samples_csv,
)

DAY = dt.date(2021, 3, 1)
MIN = 60_000


def day_start(offset=0):
    return DayWindow(DAY, offset).start_ms


def hr(ts, v, user="a"):
    return Sample(user, ts, Kind.HEART_RATE, v)


def test_parse_csv_with_and_without_header():
    body = "a,1000,hr,60\na,2000,steps,12\n"
    with_header = "user_id,timestamp_ms,kind,value\n" + body
    assert parse_samples(body) == parse_samples(with_header)
    s = parse_samples(body)
    assert s[0] == Sample("a", 1000, Kind.HEART_RATE, 60.0)
    assert s[1].kind is Kind.STEPS


def test_parse_jsonl_matches_csv():
    lines = [json.dumps({"user_id": "a", "timestamp_ms": 1000, "kind": "hr", "value": 61.5})]
    assert parse_samples("\n".join(lines), format="jsonl") == parse_samples("a,1000,hr,61.5")


def test_parse_error_reports_line():
    with pytest.raises(ParseError) as err:
        parse_samples("a,1000,hr,60\n\na,xx,hr,60\n")
    assert err.value.line == 3


@pytest.mark.parametrize("row", ["a,1000,temp,60", "a,-5,hr,60", "a,1000,hr,-1", "a,1000,hr"])
def test_parse_rejects_bad_records(row):
    with pytest.raises(ParseError):
        parse_samples(row)


def test_samples_csv_roundtrip():
    samples = [hr(1000, 60.25), Sample("b", 5000, Kind.STEPS, 3.0)]
    buf = io.StringIO()
    write_samples_csv(samples, buf)
    assert parse_samples(buf.getvalue()) == samples


def test_day_window_uses_local_midnight():
    # 23:30 UTC on Feb 28 is 01:30 local on Mar 1 at UTC+2
    ts = day_start(0) - 30 * MIN
    assert DayWindow.containing(ts, 120).local_date == DAY
    assert DayWindow.containing(ts, 0).local_date == DAY - dt.timedelta(days=1)


def test_slice_days_groups_by_user_and_local_date():
    t0 = day_start()
    samples = [hr(t0 + 10 * MIN, 60), hr(t0 + 25 * 60 * MIN, 61), hr(t0 + 5 * MIN, 62, "b")]
    days = slice_days(samples)
    assert list(days) == [("a", DAY), ("a", DAY + dt.timedelta(days=1)), ("b", DAY)]


def test_resample_means_heart_rate_and_sums_steps():
    t0 = day_start()
    s = resample([hr(t0, 60), hr(t0 + 10 * MIN, 70), hr(t0 + 40 * MIN, 80)])
    assert s.slots[0] == 65.0 and s.slots[1] == 80.0
    steps = [Sample("a", t0 + m * MIN, Kind.STEPS, 10.0) for m in (0, 5, 20)]
    assert resample(steps).slots[0] == 30.0


def test_resample_fills_gaps():
    t0 = day_start()
    s = resample([hr(t0 + 2 * 30 * MIN, 60), hr(t0 + 4 * 30 * MIN, 80)])
    np.testing.assert_array_equal(s.slots[:5], [60, 60, 60, 70, 80])
    assert s.slots[-1] == 80
    assert s.coverage == pytest.approx(2 / 48)
    assert s.observed.sum() == 2


def test_resample_with_offset_places_slots_locally():
    off = -300
    t0 = DayWindow(DAY, off).start_ms
    s = resample([hr(t0 + 60 * MIN, 70)], utc_offset_minutes=off)
    assert s.local_date == DAY and s.observed[2]


def test_resample_errors():
    with pytest.raises(EmptyDayError):
        resample([])
    with pytest.raises(ParameterError):
        resample([hr(day_start(), 60)], slot_minutes=7)
    with pytest.raises(ParameterError):
        resample([hr(day_start(), 60), hr(day_start() + 2 * 86_400_000, 60)])


def test_series_to_samples_inverts_resample():
    rng = np.random.default_rng(0)
    s = FixedSeries("a", DAY, rng.uniform(50, 90, 48))
    assert resample(series_to_samples(s, 60), utc_offset_minutes=60) == FixedSeries(
        "a", DAY, s.slots, coverage=1.0)


def test_normalize_clamps_and_denormalize_inverts():
    s = FixedSeries("a", DAY, np.linspace(20, 260, 48))
    n = normalize(s)
    assert n.normalized and n.slots.min() == 0.0 and n.slots.max() == 1.0
    inside = FixedSeries("a", DAY, np.linspace(40, 200, 48))
    np.testing.assert_allclose(denormalize(normalize(inside)).slots, inside.slots, atol=1e-12)
    with pytest.raises(InvalidRangeError):
        normalize(s, 100, 100)
    with pytest.raises(ParameterError):
        normalize(n)


def test_series_is_immutable():
    s = FixedSeries("a", DAY, np.zeros(48))
    with pytest.raises(ValueError):
        s.slots[0] = 1.0


def test_window_slice():
    s = FixedSeries("a", DAY, np.arange(48.0))
    frag = window_slice(s, 0, 8)
    np.testing.assert_array_equal(frag.slots, np.arange(16.0))
    with pytest.raises(AlignmentError):
        window_slice(FixedSeries("a", DAY, np.zeros(12), slot_minutes=120), 1, 8)
    with pytest.raises(ParameterError):
        window_slice(s, 8, 8)


def test_night_shift_filter():
    night = np.zeros(48)
    night[:16] = 100.0  # 1600 steps between 00:00 and 08:00
    quiet = np.zeros(48)
    steps = [FixedSeries("n", DAY + dt.timedelta(days=i), night, kind=Kind.STEPS) for i in range(3)]
    steps += [FixedSeries("q", DAY, quiet, kind=Kind.STEPS)]
    res = night_shift_filter(["n", "q", "x"], steps)
    assert res.excluded == {"n"}
    assert res.retained == {"q", "x"}
    assert res.unevaluated == {"x"}


def test_corpus_csv_roundtrip_is_exact():
    rng = np.random.default_rng(1)
    series = [FixedSeries(f"u{i}", DAY, rng.uniform(40, 120, 48), coverage=0.75) for i in range(3)]
    buf = io.StringIO()
    write_corpus_csv(Corpus(series), buf)
    back = read_corpus_csv(buf.getvalue())
    assert back.series == series


def test_corpus_rejects_mixed_lengths():
    with pytest.raises(ParameterError):
        Corpus([FixedSeries("a", DAY, np.zeros(48)), FixedSeries("b", DAY, np.zeros(24), slot_minutes=60)])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1439), st.floats(31, 245)), min_size=1, max_size=60))
def test_resample_invariants(points):
    t0 = day_start()
    s = resample([hr(t0 + m * MIN, v) for m, v in points])
    values = [v for _, v in points]
    assert s.length == 48
    assert np.all(np.isfinite(s.slots))
    # means and linear interpolation never leave the observed range
    assert s.slots.min() >= min(values) - 1e-9 and s.slots.max() <= max(values) + 1e-9
    assert s.coverage == pytest.approx(len({m // 30 for m, _ in points}) / 48)
