"""Check-in parsing, trajectory segmentation, and stay-time estimation.

The raw input is a CSV of time-stamped POI check-ins.  This module turns it
into per-user, per-day trajectories and then into stay sequences: for every
visited POI we estimate how long the user actually stayed there by
subtracting an estimated travel time from the gap to the next check-in.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

__all__ = [
    "DayType",
    "IngestError",
    "CategoryTaxonomy",
    "HolidayCalendar",
    "MovementRecord",
    "Trajectory",
    "StayVisit",
    "StaySequence",
    "RejectedRow",
    "ParseReport",
    "TravelTimeProvider",
    "GreatCircleProvider",
    "haversine_meters",
    "parse_checkins",
    "build_trajectories",
    "estimate_stays",
    "classify_day",
]

# Mean Earth radius in meters (IUGG value), used for great-circle distances.
EARTH_RADIUS_M = 6_371_008.8

# A gap longer than this splits a user's day into separate trajectories.
DEFAULT_SPLIT_GAP_SECONDS = 6 * 3600.0

# Assumed stay time at the final check-in of a trajectory, where no
# follow-up check-in exists to bound the stay.
DEFAULT_TAIL_STAY_SECONDS = 30 * 60.0

# Assumed door-to-door travel speed for the great-circle travel estimator.
DEFAULT_SPEED_KMH = 25.0

# If more than this fraction of data rows is malformed, the whole parse is
# treated as a schema problem rather than noise, and aborts.
REJECT_FRACTION_FATAL = 0.10

_REQUIRED_COLUMNS = ("user_id", "poi_id", "category", "lat", "lon", "timestamp")

_DEFAULT_CATEGORIES = (
    "Arts & Entertainment",
    "College & University",
    "Food",
    "Great Outdoors",
    "Nightlife Spot",
    "Professional & Other Places",
    "Residence",
    "Shop & Service",
    "Travel & Transport",
)


class IngestError(Exception):
    """Raised when the check-in source cannot be used at all."""


class DayType(str, Enum):
    """Calendar class of a day; movement habits differ strongly between them."""

    WEEKDAY = "weekday"
    WEEKEND = "weekend"
    HOLIDAY = "holiday"


@dataclass(frozen=True, slots=True)
class CategoryTaxonomy:
    """Closed set of POI categories.

    Attributes:
        categories: Category names in canonical order.  Density vectors and
            category counts produced elsewhere use this order.
    """

    categories: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.categories) != len(set(self.categories)):
            raise ValueError("duplicate category names in taxonomy")
        if not self.categories:
            raise ValueError("taxonomy must contain at least one category")

    @property
    def size(self) -> int:
        return len(self.categories)

    def __contains__(self, name: object) -> bool:
        return name in self.categories

    def index_of(self, name: str) -> int:
        return self.categories.index(name)

    @classmethod
    def default(cls) -> "CategoryTaxonomy":
        """The nine top-level categories used throughout the fixtures."""
        return cls(_DEFAULT_CATEGORIES)

    @classmethod
    def from_file(cls, path: str | Path) -> "CategoryTaxonomy":
        """Load a taxonomy from a JSON array of category names."""
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, list) or not all(isinstance(c, str) for c in data):
            raise IngestError(f"taxonomy file {path} must be a JSON array of strings")
        return cls(tuple(data))


class HolidayCalendar:
    """Set of public-holiday dates, loaded from a newline-delimited file."""

    def __init__(self, dates: Iterable[date] = ()) -> None:
        self._dates = frozenset(dates)

    def __contains__(self, day: date) -> bool:
        return day in self._dates

    def __len__(self) -> int:
        return len(self._dates)

    @classmethod
    def from_file(cls, path: str | Path) -> "HolidayCalendar":
        days = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                try:
                    days.append(date.fromisoformat(text))
                except ValueError as exc:
                    raise IngestError(
                        f"bad holiday date at {path}:{lineno}: {text!r}"
                    ) from exc
        return cls(days)


@dataclass(frozen=True, slots=True)
class MovementRecord:
    """One validated check-in row.

    Attributes:
        user_id: Opaque user identifier.
        poi_id: Opaque POI identifier.
        category: POI category; always a member of the parse taxonomy.
        lat: WGS84 latitude in degrees.
        lon: WGS84 longitude in degrees.
        timestamp: Timezone-aware UTC check-in time.
    """

    user_id: str
    poi_id: str
    category: str
    lat: float
    lon: float
    timestamp: datetime


@dataclass(frozen=True, slots=True)
class Trajectory:
    """A maximal run of one user's check-ins within a single day.

    Runs are split whenever the gap between consecutive check-ins exceeds the
    split threshold, and single-record runs are dropped, so ``records`` always
    holds at least two entries with strictly increasing timestamps.
    """

    user_id: str
    day: date
    records: tuple[MovementRecord, ...]

    @property
    def span_seconds(self) -> float:
        return (self.records[-1].timestamp - self.records[0].timestamp).total_seconds()


@dataclass(slots=True)
class StayVisit:
    """A POI visit with estimated stay and travel durations.

    ``region_id`` is filled in later by spatial projection; ``flagged`` marks
    visits whose travel time came from the fallback estimator.
    """

    poi_id: str
    category: str
    lat: float
    lon: float
    arrival: datetime
    stay_seconds: float
    travel_seconds: float
    region_id: str | None = None
    flagged: bool = False

    @property
    def departure(self) -> datetime:
        from datetime import timedelta

        return self.arrival + timedelta(seconds=self.stay_seconds)


@dataclass(slots=True)
class StaySequence:
    """All stay visits of one user-day trajectory, in arrival order."""

    user_id: str
    day: date
    visits: list[StayVisit]
    day_type: DayType | None = None


@dataclass(frozen=True, slots=True)
class RejectedRow:
    """A malformed CSV row: 1-based file line number plus the reason."""

    line: int
    reason: str


@dataclass(slots=True)
class ParseReport:
    """Outcome of a parse: accepted records plus an account of rejects."""

    records: list[MovementRecord]
    rejected: list[RejectedRow] = field(default_factory=list)
    total_rows: int = 0

    @property
    def reject_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for row in self.rejected:
            counts[row.reason] = counts.get(row.reason, 0) + 1
        return dict(sorted(counts.items()))


class TravelTimeProvider(Protocol):
    """Estimates door-to-door travel time between two consecutive check-ins."""

    def travel_seconds(self, a: MovementRecord, b: MovementRecord) -> float:
        ...


def haversine_meters(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance between two WGS84 points, in meters."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True, slots=True)
class GreatCircleProvider:
    """Travel time = great-circle distance at a constant assumed speed."""

    speed_kmh: float = DEFAULT_SPEED_KMH

    def travel_seconds(self, a: MovementRecord, b: MovementRecord) -> float:
        meters = haversine_meters(a.lat, a.lon, b.lat, b.lon)
        return meters / (self.speed_kmh * 1000.0 / 3600.0)


def parse_checkins(source, taxonomy: CategoryTaxonomy) -> ParseReport:
    """Parse a check-in CSV into validated movement records.

    ``source`` may be a path or an open binary/text buffer.  Required columns:
    user_id, poi_id, category, lat, lon, timestamp (RFC 3339).  Malformed rows
    are rejected individually with a per-row reason; a missing column or an
    unreadable stream is fatal, as is a reject fraction above
    ``REJECT_FRACTION_FATAL``.

    Accepted records come back sorted by (user_id, timestamp), ties keeping
    file order, which is the order the trajectory builder expects.
    """
    try:
        df = pd.read_csv(source, dtype=str, keep_default_na=False)
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise IngestError(f"unreadable check-in source: {exc}") from exc

    missing = [c for c in _REQUIRED_COLUMNS if c not in df.columns]
    if missing:
        raise IngestError(f"check-in source missing required columns: {missing}")

    total = len(df)
    if total == 0:
        logger.warning("check-in source contains a header but no data rows")
        return ParseReport(records=[], rejected=[], total_rows=0)

    lat = pd.to_numeric(df["lat"], errors="coerce")
    lon = pd.to_numeric(df["lon"], errors="coerce")
    ts = pd.to_datetime(df["timestamp"], errors="coerce", utc=True, format="ISO8601")

    has_missing = (
        (df["user_id"].str.len() == 0)
        | (df["poi_id"].str.len() == 0)
        | (df["category"].str.len() == 0)
        | (df["lat"].str.len() == 0)
        | (df["lon"].str.len() == 0)
        | (df["timestamp"].str.len() == 0)
    )
    bad_coords = lat.isna() | lon.isna() | (lat.abs() > 90.0) | (lon.abs() > 180.0)
    bad_ts = ts.isna()
    bad_cat = ~df["category"].isin(taxonomy.categories)

    # First failing check wins as the reported reason.
    reason = np.select(
        [has_missing.to_numpy(), bad_coords.to_numpy(), bad_ts.to_numpy(), bad_cat.to_numpy()],
        ["missing_field", "bad_coordinates", "bad_timestamp", "unknown_category"],
        default="",
    )
    bad_mask = reason != ""

    rejected = [
        RejectedRow(line=int(idx) + 2, reason=str(why))  # +2: header line and 1-based
        for idx, why in zip(df.index[bad_mask], reason[bad_mask])
    ]
    if rejected:
        counts: dict[str, int] = {}
        for row in rejected:
            counts[row.reason] = counts.get(row.reason, 0) + 1
        logger.warning("rejected %d/%d check-in rows: %s", len(rejected), total, counts)
    if len(rejected) / total > REJECT_FRACTION_FATAL:
        raise IngestError(
            f"{len(rejected)} of {total} rows malformed "
            f"(> {REJECT_FRACTION_FATAL:.0%}); refusing to continue"
        )

    good = df.loc[~bad_mask].copy()
    good["lat"] = lat[~bad_mask]
    good["lon"] = lon[~bad_mask]
    good["ts"] = ts[~bad_mask]
    good = good.sort_values(["user_id", "ts"], kind="mergesort")

    times = pd.DatetimeIndex(good["ts"]).to_pydatetime()
    records = [
        MovementRecord(u, p, c, float(la), float(lo), t)
        for u, p, c, la, lo, t in zip(
            good["user_id"].to_numpy(),
            good["poi_id"].to_numpy(),
            good["category"].to_numpy(),
            good["lat"].to_numpy(),
            good["lon"].to_numpy(),
            times,
        )
    ]
    return ParseReport(records=records, rejected=rejected, total_rows=total)


def build_trajectories(
    records: Sequence[MovementRecord],
    split_gap_seconds: float = DEFAULT_SPLIT_GAP_SECONDS,
) -> list[Trajectory]:
    """Segment per-user record streams into per-day trajectories.

    Records must already be sorted by (user_id, timestamp).  A new trajectory
    starts at every user change, calendar-day change (UTC), or gap larger than
    ``split_gap_seconds``.  Records sharing a timestamp with their predecessor
    are dropped so timestamps are strictly increasing, and single-record
    segments are discarded.
    """
    out: list[Trajectory] = []
    current: list[MovementRecord] = []

    def flush() -> None:
        if len(current) >= 2:
            out.append(
                Trajectory(
                    user_id=current[0].user_id,
                    day=current[0].timestamp.date(),
                    records=tuple(current),
                )
            )

    for rec in records:
        if not current:
            current = [rec]
            continue
        prev = current[-1]
        same_run = (
            rec.user_id == prev.user_id
            and rec.timestamp.date() == prev.timestamp.date()
            and (rec.timestamp - prev.timestamp).total_seconds() <= split_gap_seconds
        )
        if same_run:
            if rec.timestamp == prev.timestamp:
                continue  # duplicate timestamp; keep the first occurrence
            current.append(rec)
        else:
            flush()
            current = [rec]
    flush()
    return out


def estimate_stays(
    trajectory: Trajectory,
    provider: TravelTimeProvider | None = None,
    tail_stay_seconds: float = DEFAULT_TAIL_STAY_SECONDS,
    fallback: TravelTimeProvider | None = None,
) -> StaySequence:
    """Estimate per-POI stay durations along one trajectory.

    For consecutive check-ins a → b the stay at a is the inter-check-in gap
    minus the estimated a→b travel time; travel is clamped into [0, gap] so
    stays are never negative and never exceed the gap.  Consecutive check-ins
    at the same POI count the whole gap as stay.  The final visit gets the
    fixed ``tail_stay_seconds``.  If the primary provider raises, the
    fallback provider (default: great-circle) is used and the visit is
    flagged.
    """
    if provider is None:
        provider = GreatCircleProvider()
    if fallback is None:
        fallback = GreatCircleProvider()

    visits: list[StayVisit] = []
    recs = trajectory.records
    for i, rec in enumerate(recs):
        flagged = False
        if i == len(recs) - 1:
            stay = float(tail_stay_seconds)
            travel = 0.0
        else:
            nxt = recs[i + 1]
            gap = (nxt.timestamp - rec.timestamp).total_seconds()
            if nxt.poi_id == rec.poi_id:
                travel = 0.0
            else:
                try:
                    travel = float(provider.travel_seconds(rec, nxt))
                except Exception:
                    logger.debug(
                        "travel estimator failed for %s->%s; using fallback",
                        rec.poi_id,
                        nxt.poi_id,
                    )
                    travel = float(fallback.travel_seconds(rec, nxt))
                    flagged = True
            travel = min(max(travel, 0.0), gap)
            stay = gap - travel
        visits.append(
            StayVisit(
                poi_id=rec.poi_id,
                category=rec.category,
                lat=rec.lat,
                lon=rec.lon,
                arrival=rec.timestamp,
                stay_seconds=stay,
                travel_seconds=travel,
                flagged=flagged,
            )
        )
    return StaySequence(user_id=trajectory.user_id, day=trajectory.day, visits=visits)


def classify_day(day: date, calendar: HolidayCalendar | None = None) -> DayType:
    """Classify a date as holiday, weekend, or weekday; holidays win."""
    if calendar is not None and day in calendar:
        return DayType.HOLIDAY
    if day.weekday() >= 5:
        return DayType.WEEKEND
    return DayType.WEEKDAY
