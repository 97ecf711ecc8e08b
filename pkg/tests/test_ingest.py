"""Check-in parsing, trajectory segmentation, and stay estimation."""

import io
import math
from datetime import date, datetime, timedelta, timezone

import pytest

from honflow import (
    CategoryTaxonomy,
    DayType,
    HolidayCalendar,
    MovementRecord,
    build_trajectories,
    classify_day,
    estimate_stays,
    parse_checkins,
)
from honflow.ingest import DEFAULT_TAIL_STAY_SECONDS, IngestError

TAX = CategoryTaxonomy.default()
HEADER = "user_id,poi_id,category,lat,lon,timestamp\n"

# Degrees of latitude per metre along a meridian; used to place points an
# exact great-circle distance apart so both distance formulas must agree.
DEG_PER_METER = 180.0 / (math.pi * 6_371_008.8)


def row(user="u1", poi="p1", cat="Food", lat=40.0, lon=-74.0, ts="2013-07-08T08:00:00Z"):
    return f"{user},{poi},{cat},{lat},{lon},{ts}\n"


def rec(user, poi, ts, cat="Food", lat=40.0, lon=-74.0):
    return MovementRecord(user, poi, cat, lat, lon, ts)


def test_parse_clean_rows():
    src = io.StringIO(HEADER + row() + row(poi="p2", ts="2013-07-08T09:30:00Z") + row(user="u2"))
    report = parse_checkins(src, TAX)
    assert report.total_rows == 3
    assert report.rejected == []
    assert len(report.records) == 3
    first = report.records[0]
    assert first.timestamp == datetime(2013, 7, 8, 8, 0, tzinfo=timezone.utc)
    assert [r.user_id for r in report.records] == ["u1", "u1", "u2"]


def test_parse_normalizes_timezone_offsets():
    src = io.StringIO(HEADER + row(ts="2013-07-08T10:00:00+02:00"))
    report = parse_checkins(src, TAX)
    assert report.records[0].timestamp == datetime(2013, 7, 8, 8, 0, tzinfo=timezone.utc)


def test_parse_reject_reasons_and_line_numbers():
    good = row() * 40
    bad = (
        row(poi="")
        + row(lat=95.0)
        + row(ts="yesterday")
        + row(cat="Spaceport")
    )
    report = parse_checkins(io.StringIO(HEADER + good + bad), TAX)
    assert report.total_rows == 44
    assert len(report.records) == 40
    assert report.reject_counts == {
        "bad_coordinates": 1,
        "bad_timestamp": 1,
        "missing_field": 1,
        "unknown_category": 1,
    }
    # line numbers are 1-based file lines (header is line 1)
    assert [r.line for r in report.rejected] == [42, 43, 44, 45]


def test_parse_rejects_above_ten_percent_is_fatal():
    src = io.StringIO(HEADER + row() * 6 + row(ts="nope"))
    with pytest.raises(IngestError):
        parse_checkins(src, TAX)


def test_parse_header_only_gives_empty_report():
    report = parse_checkins(io.StringIO(HEADER), TAX)
    assert report.total_rows == 0
    assert report.records == []
    assert report.rejected == []


def test_parse_is_deterministic():
    text = HEADER + row() + row(user="u0", ts="2013-07-08T07:00:00Z") + row(poi="p9")
    a = parse_checkins(io.StringIO(text), TAX).records
    b = parse_checkins(io.StringIO(text), TAX).records
    assert a == b


def test_trajectories_split_on_user_day_and_gap():
    t0 = datetime(2013, 7, 8, 8, 0, tzinfo=timezone.utc)
    records = [
        rec("a", "p1", t0),
        rec("a", "p2", t0 + timedelta(minutes=10)),
        rec("a", "p3", t0 + timedelta(hours=7)),  # 6h50m after p2: beyond the split gap
        rec("a", "p4", t0 + timedelta(hours=7, minutes=20)),
        rec("b", "p1", t0 + timedelta(minutes=5)),
        rec("b", "p2", t0 + timedelta(minutes=45)),
        rec("a", "p5", t0 + timedelta(days=1)),  # next day and alone: dropped
    ]
    trajs = build_trajectories(records)
    got = {(t.user_id, tuple(r.poi_id for r in t.records)) for t in trajs}
    assert got == {("a", ("p1", "p2")), ("a", ("p3", "p4")), ("b", ("p1", "p2"))}
    for t in trajs:
        assert all(x.timestamp < y.timestamp for x, y in zip(t.records, t.records[1:]))


def test_trajectories_drop_duplicate_timestamps():
    t0 = datetime(2013, 7, 8, 8, 0, tzinfo=timezone.utc)
    records = [
        rec("a", "p1", t0),
        rec("a", "p2", t0),  # same instant: first row wins
        rec("a", "p3", t0 + timedelta(minutes=30)),
    ]
    trajs = build_trajectories(records)
    assert len(trajs) == 1
    assert [r.poi_id for r in trajs[0].records] == ["p1", "p3"]


def independent_distance_m(lat1, lon1, lat2, lon2):
    # Spherical distance via the atan2 form, deliberately not the module's
    # half-angle formula.
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dl = math.radians(lon2 - lon1)
    y = math.hypot(
        math.cos(p2) * math.sin(dl),
        math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl),
    )
    x = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return 6_371_008.8 * math.atan2(y, x)


def test_stay_estimation_matches_independent_travel_time():
    """A 1 km hop at 25 km/h costs 144 s; the 30 min gap leaves a 1656 s stay."""
    t0 = datetime(2013, 7, 8, 8, 0, tzinfo=timezone.utc)
    lat2 = 40.0 + 1000.0 * DEG_PER_METER
    traj = build_trajectories([
        rec("u", "p1", t0),
        rec("u", "p2", t0 + timedelta(minutes=30), lat=lat2),
    ])[0]
    seq = estimate_stays(traj)
    v1, v2 = seq.visits

    d = independent_distance_m(40.0, -74.0, lat2, -74.0)
    expected_travel = d / (25.0 * 1000.0 / 3600.0)
    assert v1.travel_seconds == pytest.approx(expected_travel, abs=0.01)
    assert v1.travel_seconds == pytest.approx(144.0, abs=0.5)
    assert v1.stay_seconds == pytest.approx(1800.0 - expected_travel, abs=0.01)
    assert v1.departure == v1.arrival + timedelta(seconds=v1.stay_seconds)
    # last visit has no observed departure: configured tail stay applies
    assert v2.stay_seconds == DEFAULT_TAIL_STAY_SECONDS
    assert v2.travel_seconds == 0.0


def test_travel_clamped_to_gap():
    # 10 km needs 1440 s at 25 km/h, but the next check-in is 600 s later.
    t0 = datetime(2013, 7, 8, 8, 0, tzinfo=timezone.utc)
    traj = build_trajectories([
        rec("u", "p1", t0),
        rec("u", "p2", t0 + timedelta(seconds=600), lat=40.0 + 10_000.0 * DEG_PER_METER),
    ])[0]
    v1 = estimate_stays(traj).visits[0]
    assert v1.travel_seconds == 600.0
    assert v1.stay_seconds == 0.0


def test_same_poi_revisit_costs_no_travel():
    t0 = datetime(2013, 7, 8, 8, 0, tzinfo=timezone.utc)
    traj = build_trajectories([
        rec("u", "p1", t0),
        rec("u", "p1", t0 + timedelta(seconds=600)),
    ])[0]
    v1 = estimate_stays(traj).visits[0]
    assert v1.travel_seconds == 0.0
    assert v1.stay_seconds == 600.0


class FailingProvider:
    def travel_seconds(self, a, b):
        raise RuntimeError("offline")


def test_provider_failure_falls_back_and_flags():
    t0 = datetime(2013, 7, 8, 8, 0, tzinfo=timezone.utc)
    traj = build_trajectories([
        rec("u", "p1", t0),
        rec("u", "p2", t0 + timedelta(minutes=30), lat=40.0 + 1000.0 * DEG_PER_METER),
    ])[0]
    seq = estimate_stays(traj, provider=FailingProvider())
    v1, v2 = seq.visits
    assert v1.flagged
    assert v1.travel_seconds == pytest.approx(144.0, abs=0.5)
    assert not v2.flagged  # the tail visit has no outgoing leg to estimate


def test_stays_partition_the_observed_gaps():
    t0 = datetime(2013, 7, 8, 6, 0, tzinfo=timezone.utc)
    offsets = [0, 17, 43, 55, 120, 200]
    traj = build_trajectories([
        rec("u", f"p{i}", t0 + timedelta(minutes=m), lat=40.0 + i * 900.0 * DEG_PER_METER)
        for i, m in enumerate(offsets)
    ])[0]
    seq = estimate_stays(traj)
    for v, nxt in zip(seq.visits, seq.visits[1:]):
        gap = (nxt.arrival - v.arrival).total_seconds()
        assert v.stay_seconds >= 0.0
        assert v.travel_seconds >= 0.0
        assert v.stay_seconds + v.travel_seconds == pytest.approx(gap, abs=1e-6)


def test_classify_day_rules():
    cal = HolidayCalendar([date(2013, 7, 4), date(2013, 7, 6)])
    assert classify_day(date(2013, 7, 8)) is DayType.WEEKDAY  # Monday
    assert classify_day(date(2013, 7, 6)) is DayType.WEEKEND  # Saturday, no calendar
    assert classify_day(date(2013, 7, 4), cal) is DayType.HOLIDAY
    # a listed holiday beats the weekend rule
    assert classify_day(date(2013, 7, 6), cal) is DayType.HOLIDAY
