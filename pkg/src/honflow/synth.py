"""Synthetic fixture generation: regions, POIs, and planted movement corpora.

The generated world is a set of spatially isolated blocks of grid cells, each
with a home POI category.  Movement sequences are planted so that specific
higher-order rules exist by construction: a dense two-step morning commute
and its evening counterpart (order-2 signal), two long chains that share a
suffix and disambiguate only at order 4, a holiday-only pattern, and random
noise walks that no rule should survive.  Two special blocks exercise
time-dependent clustering: a six-cell line whose access categories split at
midday, and a Food-POI block that is accessed via transport in the morning
and nightlife in the evening.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

__all__ = ["FixtureSummary", "make_grid_regions", "generate_fixture"]

CELL_DEG = 0.01
LON0, LAT0 = -74.10, 40.55

_CATS = (
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

# 2x2 blocks at slot coordinates (slot pitch = 3 cells -> one-cell gaps).
_BLOCKS: dict[str, tuple[tuple[int, int], str]] = {
    "A": ((0, 0), "Residence"),
    "B": ((1, 0), "Travel & Transport"),
    "X": ((2, 0), "Professional & Other Places"),
    "C": ((0, 1), "Great Outdoors"),
    "D": ((1, 1), "Shop & Service"),
    "E": ((3, 1), "Nightlife Spot"),
    "Y": ((2, 1), "Food"),
    "G": ((0, 3), "Nightlife Spot"),
    "H": ((1, 3), "Food"),
    "K": ((2, 3), "Arts & Entertainment"),
    "P": ((4, 0), "College & University"),
    "Q": ((5, 0), "Shop & Service"),
    "S": ((6, 0), "Professional & Other Places"),
    "T1": ((7, 0), "Food"),
    "P2": ((4, 1), "Residence"),
    "R": ((5, 1), "Travel & Transport"),
    "T2": ((7, 1), "Great Outdoors"),
    "W": ((4, 2), "College & University"),
    "Z": ((5, 2), "Residence"),
    "T3": ((6, 2), "Nightlife Spot"),
    "T4": ((7, 2), "Arts & Entertainment"),
}
_NOISE_BLOCKS = {f"N{i}": ((4 + i % 5, 4 + i // 5), _CATS[i % 9]) for i in range(10)}

# Six-cell line: Food everywhere, but midday accesses split Food / Shop.
_M_CELLS = [(i, 19) for i in range(6)]
# Food-dominant block accessed via transport (morning) / nightlife (evening).
_F_ORIGIN = (21, 19)

_WEEKDAY_POOL_START = date(2013, 7, 8)  # a Monday
_WEEKEND_POOL_START = date(2013, 7, 6)  # a Saturday
_HOLIDAYS = (date(2013, 7, 4), date(2013, 9, 2))


def _cell_feature(region_id: str, cx: int, cy: int) -> dict:
    x0 = LON0 + cx * CELL_DEG
    y0 = LAT0 + cy * CELL_DEG
    x1, y1 = x0 + CELL_DEG, y0 + CELL_DEG
    return {
        "type": "Feature",
        "properties": {"region_id": region_id},
        "geometry": {
            "type": "Polygon",
            "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]],
        },
    }


def make_grid_regions(
    nx: int,
    ny: int,
    cell_deg: float = CELL_DEG,
    lon0: float = 0.0,
    lat0: float = 0.0,
    prefix: str = "r",
) -> dict:
    """A dense nx × ny grid of square regions as a GeoJSON FeatureCollection."""
    feats = []
    for y in range(ny):
        for x in range(nx):
            x0, y0 = lon0 + x * cell_deg, lat0 + y * cell_deg
            x1, y1 = x0 + cell_deg, y0 + cell_deg
            feats.append(
                {
                    "type": "Feature",
                    "properties": {"region_id": f"{prefix}{y:02d}{x:02d}"},
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]],
                    },
                }
            )
    return {"type": "FeatureCollection", "features": feats}


def _poi_coord(cx: int, cy: int, fx: float, fy: float) -> tuple[float, float]:
    return LON0 + (cx + fx) * CELL_DEG, LAT0 + (cy + fy) * CELL_DEG


@dataclass(frozen=True)
class _Poi:
    poi_id: str
    category: str
    lon: float
    lat: float


def _build_world() -> tuple[list[dict], dict[str, list[_Poi]], dict[str, list[_Poi]]]:
    """Features, flow POIs by block, and special POI groups.

    Returns (features, block_pois, special) where special holds the keyed POI
    groups of the M line and F block.
    """
    features: list[dict] = []
    block_pois: dict[str, list[_Poi]] = {}
    special: dict[str, list[_Poi]] = {}

    for name, ((sx, sy), category) in {**_BLOCKS, **_NOISE_BLOCKS}.items():
        pois: list[_Poi] = []
        for i, (dx, dy) in enumerate([(0, 0), (1, 0), (0, 1), (1, 1)]):
            cx, cy = sx * 3 + dx, sy * 3 + dy
            rid = f"{name}_{i}"
            features.append(_cell_feature(rid, cx, cy))
            for j, (fx, fy) in enumerate([(0.3, 0.3), (0.7, 0.6)]):
                lon, lat = _poi_coord(cx, cy, fx, fy)
                pois.append(_Poi(f"{rid}p{j}", category, lon, lat))
        block_pois[name] = pois

    m_food: list[_Poi] = []
    m_shop: list[_Poi] = []
    for i, (cx, cy) in enumerate(_M_CELLS):
        rid = f"M{i}"
        features.append(_cell_feature(rid, cx, cy))
        lon, lat = _poi_coord(cx, cy, 0.3, 0.4)
        m_food.append(_Poi(f"{rid}pF", "Food", lon, lat))
        lon, lat = _poi_coord(cx, cy, 0.7, 0.6)
        m_shop.append(_Poi(f"{rid}pS", "Shop & Service", lon, lat))
    special["m_food"] = m_food
    special["m_shop"] = m_shop

    f_food: list[_Poi] = []
    f_transport: list[_Poi] = []
    f_nightlife: list[_Poi] = []
    fx0, fy0 = _F_ORIGIN
    for i, (dx, dy) in enumerate([(0, 0), (1, 0), (0, 1), (1, 1)]):
        cx, cy = fx0 + dx, fy0 + dy
        rid = f"F_{i}"
        features.append(_cell_feature(rid, cx, cy))
        for j, (fx, fy) in enumerate([(0.2, 0.2), (0.4, 0.6), (0.6, 0.3), (0.8, 0.7)]):
            lon, lat = _poi_coord(cx, cy, fx, fy)
            f_food.append(_Poi(f"{rid}pF{j}", "Food", lon, lat))
        lon, lat = _poi_coord(cx, cy, 0.3, 0.85)
        f_transport.append(_Poi(f"{rid}pT", "Travel & Transport", lon, lat))
        lon, lat = _poi_coord(cx, cy, 0.7, 0.85)
        f_nightlife.append(_Poi(f"{rid}pN", "Nightlife Spot", lon, lat))
    special["f_food"] = f_food
    special["f_transport"] = f_transport
    special["f_nightlife"] = f_nightlife

    return features, block_pois, special


@dataclass(frozen=True)
class FixtureSummary:
    """What generate_fixture wrote and how much of it."""

    out_dir: str
    records: int
    sequences: int
    regions: int
    pois: int
    checkins: str
    regions_file: str
    taxonomy: str
    holidays: str
    config: str


def _weekday_pool(n: int) -> list[date]:
    pool: list[date] = []
    d = _WEEKDAY_POOL_START
    while len(pool) < n:
        if d.weekday() < 5 and d not in _HOLIDAYS:
            pool.append(d)
        d += timedelta(days=1)
    return pool


def _weekend_pool(n: int) -> list[date]:
    pool: list[date] = []
    d = _WEEKEND_POOL_START
    while len(pool) < n:
        if d.weekday() >= 5:
            pool.append(d)
        d += timedelta(days=1)
    return pool


def generate_fixture(out_dir: str | Path, seed: int = 7, scale: float = 1.0) -> FixtureSummary:
    """Write a complete synthetic dataset (inputs + config) into ``out_dir``.

    ``scale`` multiplies every planted sequence count; the base world holds
    roughly 2.4k check-in records, so scale ≈ 420 yields about a million.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    features, block_pois, special = _build_world()

    weekdays = _weekday_pool(60)
    weekends = _weekend_pool(24)

    rows: list[tuple[str, str, str, str, str, str]] = []
    user_counter = 0
    sequences = 0

    def n_of(base: int) -> int:
        return max(1, int(round(base * scale)))

    def add_sequence(day: date, stops: list[tuple[_Poi, int, int]]) -> None:
        nonlocal user_counter, sequences
        user = f"u{user_counter:07d}"
        user_counter += 1
        sequences += 1
        for poi, hh, mm in stops:
            ts = f"{day.isoformat()}T{hh:02d}:{mm:02d}:00Z"
            rows.append((user, poi.poi_id, poi.category, f"{poi.lat:.6f}", f"{poi.lon:.6f}", ts))

    def jittered(hh: int, mm: int, j: int) -> tuple[int, int]:
        total = hh * 60 + mm + int(rng.integers(-j, j + 1))
        return divmod(total, 60)

    def pick(pois: list[_Poi]) -> _Poi:
        return pois[int(rng.integers(0, len(pois)))]

    def block_stop(name: str, hh: int, mm: int, j: int) -> tuple[_Poi, int, int]:
        h, m = jittered(hh, mm, j)
        return pick(block_pois[name]), h, m

    def chain(day: date, names: list[str], start_hh: int, start_mm: int, step: int, j: int):
        stops = []
        t = start_hh * 60 + start_mm
        for name in names:
            h, m = jittered(t // 60, t % 60, j)
            stops.append((pick(block_pois[name]), h, m))
            t += step
        add_sequence(day, stops)

    # 1-2: dense order-2 commutes crossing at hub B.  Two origins share the
    # hub in each rush window, so the previous stop (not the clock) is what
    # disambiguates the destination.
    for k in range(n_of(200)):
        day = weekdays[k % len(weekdays)]
        add_sequence(day, [block_stop("A", 7, 40, 8), block_stop("B", 8, 20, 8),
                           block_stop("X", 8, 55, 8)])
        add_sequence(day, [block_stop("D", 7, 40, 8), block_stop("B", 8, 20, 8),
                           block_stop("Y", 8, 55, 8)])
        add_sequence(day, [block_stop("C", 18, 5, 8), block_stop("B", 18, 45, 8),
                           block_stop("Y", 19, 25, 8)])
        add_sequence(day, [block_stop("E", 18, 5, 8), block_stop("B", 18, 45, 8),
                           block_stop("X", 19, 25, 8)])

    # 3: chains that disambiguate only at higher order; the last hop lands
    # mid-day with margin so every final departure stays in bin 12
    for k in range(n_of(30)):
        day = weekdays[k % len(weekdays)]
        chain(day, ["P", "Q", "R", "S", "T1"], 9, 30, 45, 5)
        chain(day, ["P2", "Q", "R", "S", "T2"], 9, 30, 45, 5)
        chain(day, ["W", "R", "S", "T4"], 10, 15, 45, 5)
        chain(day, ["Z", "S", "T3"], 11, 0, 45, 5)

    # 4: weekday noise walks across noise blocks
    noise_names = sorted(_NOISE_BLOCKS)
    for k in range(n_of(50)):
        day = weekdays[k % len(weekdays)]
        picks = rng.choice(len(noise_names), size=3, replace=False)
        stops = [
            block_stop(noise_names[int(p)], 10 + 2 * i, 30, 25)
            for i, p in enumerate(picks)
        ]
        add_sequence(day, stops)

    # 5-6: the M line — uniform Food in the morning, Food/Shop split at midday
    for k in range(n_of(40)):
        day = weekdays[k % len(weekdays)]
        i = int(rng.integers(0, 5))
        h1, m1 = jittered(7, 30, 15)
        h2, m2 = jittered(8, 40, 15)
        add_sequence(day, [(special["m_food"][i], h1, m1), (special["m_food"][i + 1], h2, m2)])
    for k in range(n_of(40)):
        day = weekdays[k % len(weekdays)]
        i = int(rng.integers(0, 5))
        h1, m1 = jittered(11, 40, 15)
        h2, m2 = jittered(12, 50, 15)
        first = special["m_food"][i] if i <= 2 else special["m_shop"][i]
        second = special["m_food"][i + 1] if i + 1 <= 2 else special["m_shop"][i + 1]
        add_sequence(day, [(first, h1, m1), (second, h2, m2)])

    # 7-8: the F block — transport accesses at breakfast, nightlife at night
    for k in range(n_of(30)):
        day = weekdays[k % len(weekdays)]
        a, b = rng.choice(4, size=2, replace=False)
        h1, m1 = jittered(7, 50, 10)
        h2, m2 = jittered(8, 40, 10)
        add_sequence(day, [(special["f_transport"][int(a)], h1, m1),
                           (special["f_transport"][int(b)], h2, m2)])
        a, b = rng.choice(4, size=2, replace=False)
        h1, m1 = jittered(19, 10, 10)
        h2, m2 = jittered(20, 0, 10)
        add_sequence(day, [(special["f_nightlife"][int(a)], h1, m1),
                           (special["f_nightlife"][int(b)], h2, m2)])
    # Lunch wanders between two Food spots inside F.  Both stops land in the
    # same level-1 cluster, so these touch the POI mix without adding any
    # cross-cluster flow; the index walk covers all sixteen Food POIs.
    for k in range(n_of(32)):
        day = weekdays[k % len(weekdays)]
        a = (2 * k) % len(special["f_food"])
        b = (2 * k + 5) % len(special["f_food"])
        h1, m1 = jittered(12, 40, 10)
        h2, m2 = jittered(13, 20, 10)
        add_sequence(day, [(special["f_food"][a], h1, m1),
                           (special["f_food"][b], h2, m2)])

    # 9: weekend noise
    for k in range(n_of(30)):
        day = weekends[k % len(weekends)]
        picks = rng.choice(len(noise_names), size=3, replace=False)
        stops = [
            block_stop(noise_names[int(p)], 11 + 2 * i, 0, 20)
            for i, p in enumerate(picks)
        ]
        add_sequence(day, stops)

    # 10: holiday-only afternoon pattern
    for k in range(n_of(60)):
        day = _HOLIDAYS[0]
        add_sequence(day, [block_stop("G", 13, 10, 8), block_stop("H", 14, 0, 8),
                           block_stop("K", 14, 50, 8)])

    df = pd.DataFrame(rows, columns=["user_id", "poi_id", "category", "lat", "lon", "timestamp"])
    checkins_path = out / "checkins.csv"
    df.to_csv(checkins_path, index=False)

    regions_path = out / "regions.geojson"
    collection = {"type": "FeatureCollection", "features": features}
    regions_path.write_text(
        json.dumps(collection, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
    )

    taxonomy_path = out / "taxonomy.json"
    taxonomy_path.write_text(json.dumps(list(_CATS), indent=2) + "\n", encoding="utf-8")

    holidays_path = out / "holidays.txt"
    holidays_path.write_text("".join(f"{d.isoformat()}\n" for d in _HOLIDAYS), encoding="utf-8")

    config_path = out / "config.json"
    config = {
        "checkins": str(checkins_path),
        "regions": str(regions_path),
        "taxonomy": str(taxonomy_path),
        "holidays": str(holidays_path),
        "out_dir": str(out / "snapshot"),
        "alphas": [0.5, 0.8],
        "beta_min": 3,
        "beta_max": 9,
        "levels": 2,
        "min_support": 5,
        "max_order": 3,
        "extract_windows": ["7-10", "12-14", "18-20"],
    }
    config_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    n_pois = sum(len(v) for v in block_pois.values()) + sum(len(v) for v in special.values())
    logger.info(
        "fixture: %d records, %d sequences, %d regions, %d pois -> %s",
        len(rows), sequences, len(features), n_pois, out,
    )
    return FixtureSummary(
        out_dir=str(out),
        records=len(rows),
        sequences=sequences,
        regions=len(features),
        pois=n_pois,
        checkins=str(checkins_path),
        regions_file=str(regions_path),
        taxonomy=str(taxonomy_path),
        holidays=str(holidays_path),
        config=str(config_path),
    )
