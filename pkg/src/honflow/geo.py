"""Region geometry: loading, adjacency, point projection, density, entropy.

Regions are arbitrary polygons in WGS84 lon/lat.  Adjacency and other metric
questions are answered in a local equirectangular meter frame anchored at the
region set's mean latitude, which is plenty accurate at city scale.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np
import shapely
from shapely import STRtree
from shapely.geometry import shape
from shapely.geometry.base import BaseGeometry

from .ingest import EARTH_RADIUS_M, CategoryTaxonomy, MovementRecord

if TYPE_CHECKING:  # avoid a runtime import cycle; windows are duck-typed here
    from .hon import TimeWindow

logger = logging.getLogger(__name__)

__all__ = [
    "GeoError",
    "Region",
    "RegionSet",
    "SpatialIndex",
    "Assignment",
    "Poi",
    "PoiCatalog",
    "DensityVector",
    "load_regions",
    "derive_adjacency",
    "project_points",
    "density_vector",
    "category_counts",
    "entropy",
    "entropy_of_counts",
    "dominant_category",
]

METERS_PER_DEG_LAT = EARTH_RADIUS_M * math.pi / 180.0

# Boundaries closer than this (in meters) count as touching for adjacency.
DEFAULT_ADJACENCY_EPSILON_M = 1.0

_WEIGHTINGS = ("poi_count", "access_frequency", "stay_time")


class GeoError(Exception):
    """Raised when a region source is unusable."""


@dataclass(slots=True)
class Region:
    """One base spatial unit.

    Attributes:
        region_id: Unique identifier, used everywhere downstream.
        polygon: Shapely Polygon or MultiPolygon in lon/lat degrees.
        centroid: (lon, lat) of the polygon centroid.
        neighbors: Adjacent region ids; filled by :func:`derive_adjacency`.
    """

    region_id: str
    polygon: BaseGeometry
    centroid: tuple[float, float]
    neighbors: set[str] = field(default_factory=set)


class RegionSet:
    """Regions keyed by id, iterated in ascending id order."""

    def __init__(self, regions: Iterable[Region]) -> None:
        ordered = sorted(regions, key=lambda r: r.region_id)
        self.regions: list[Region] = ordered
        self.by_id: dict[str, Region] = {r.region_id: r for r in ordered}
        if len(self.by_id) != len(ordered):
            raise GeoError("duplicate region_id in region set")

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    def __contains__(self, region_id: object) -> bool:
        return region_id in self.by_id

    @property
    def ids(self) -> list[str]:
        return [r.region_id for r in self.regions]

    @property
    def mean_lat(self) -> float:
        return float(np.mean([r.centroid[1] for r in self.regions]))

    def adjacency(self) -> dict[str, set[str]]:
        return {r.region_id: set(r.neighbors) for r in self.regions}

    def centroids(self) -> dict[str, tuple[float, float]]:
        return {r.region_id: r.centroid for r in self.regions}


def load_regions(source) -> RegionSet:
    """Load regions from GeoJSON (path, text, file-like, or parsed dict).

    Features must be Polygon or MultiPolygon with a ``region_id`` property
    (feature ``id`` is accepted as a fallback).  Invalid geometries, missing
    ids, and unsupported types are rejected with a warning; duplicate ids or
    an empty result are fatal.
    """
    if isinstance(source, dict):
        data = source
    elif isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    elif isinstance(source, str):
        data = json.loads(source)
    else:
        data = json.load(source)

    features = data.get("features")
    if data.get("type") != "FeatureCollection" or not isinstance(features, list):
        raise GeoError("region source is not a GeoJSON FeatureCollection")

    regions: list[Region] = []
    seen: set[str] = set()
    for i, feat in enumerate(features):
        props = feat.get("properties") or {}
        rid = props.get("region_id", feat.get("id"))
        if rid is None:
            logger.warning("feature %d has no region_id; skipped", i)
            continue
        rid = str(rid)
        geom_obj = feat.get("geometry") or {}
        if geom_obj.get("type") not in ("Polygon", "MultiPolygon"):
            logger.warning("region %s is not a polygon; skipped", rid)
            continue
        try:
            geom = shape(geom_obj)
        except Exception as exc:
            logger.warning("region %s geometry unreadable (%s); skipped", rid, exc)
            continue
        if geom.is_empty or not geom.is_valid:
            logger.warning("region %s has invalid geometry; skipped", rid)
            continue
        if rid in seen:
            raise GeoError(f"duplicate region_id {rid!r}")
        seen.add(rid)
        c = geom.centroid
        regions.append(Region(region_id=rid, polygon=geom, centroid=(c.x, c.y)))

    if not regions:
        raise GeoError("no valid regions in source")
    return RegionSet(regions)


def _to_meter_frame(geoms: Sequence[BaseGeometry], ref_lat: float) -> list[BaseGeometry]:
    kx = METERS_PER_DEG_LAT * math.cos(math.radians(ref_lat))
    ky = METERS_PER_DEG_LAT

    def tr(coords: np.ndarray) -> np.ndarray:
        out = coords.copy()
        out[:, 0] *= kx
        out[:, 1] *= ky
        return out

    return [shapely.transform(g, tr) for g in geoms]


def derive_adjacency(
    region_set: RegionSet,
    epsilon_meters: float = DEFAULT_ADJACENCY_EPSILON_M,
) -> RegionSet:
    """Fill each region's ``neighbors`` from polygon proximity.

    Two regions are adjacent when their polygons touch along a positive-length
    stretch of boundary, or when they do not touch at all but come within
    ``epsilon_meters``.  Polygons meeting in a single point (a corner) are not
    adjacent.  Mutates and returns ``region_set``.
    """
    regions = region_set.regions
    for r in regions:
        r.neighbors = set()
    if len(regions) < 2:
        return region_set

    metric = _to_meter_frame([r.polygon for r in regions], region_set.mean_lat)
    tree = STRtree(metric)
    q, t = tree.query(metric, predicate="dwithin", distance=float(epsilon_meters))
    for i, j in zip(q.tolist(), t.tolist()):
        if i >= j:
            continue
        inter = metric[i].intersection(metric[j])
        if inter.is_empty:
            touching = True  # within epsilon but disjoint
        else:
            touching = inter.length > 0.0  # shared edge, not a lone corner
        if touching:
            regions[i].neighbors.add(regions[j].region_id)
            regions[j].neighbors.add(regions[i].region_id)
    return region_set


class SpatialIndex:
    """Packed query structure mapping points to covering regions.

    Points on a shared boundary resolve to the smallest region_id among the
    covering regions; points outside every region resolve to None.
    """

    def __init__(self, region_set: RegionSet) -> None:
        self._ids = region_set.ids  # ascending, so min tree index = min id
        self._tree = STRtree([r.polygon for r in region_set.regions])

    @classmethod
    def build(cls, region_set: RegionSet) -> "SpatialIndex":
        return cls(region_set)

    def lookup_many(self, lons: np.ndarray, lats: np.ndarray) -> list[str | None]:
        pts = shapely.points(np.column_stack([np.asarray(lons, float), np.asarray(lats, float)]))
        q, t = self._tree.query(pts, predicate="covered_by")
        best = np.full(len(pts), len(self._ids), dtype=np.int64)
        if q.size:
            np.minimum.at(best, q, t)
        return [self._ids[b] if b < len(self._ids) else None for b in best]

    def lookup(self, lon: float, lat: float) -> str | None:
        return self.lookup_many(np.array([lon]), np.array([lat]))[0]


@dataclass(slots=True)
class Assignment:
    """Result of projecting point-like items onto regions."""

    members: dict[str, list]
    unassigned: list


def project_points(index: SpatialIndex, items: Sequence) -> Assignment:
    """Assign each item (anything with .lat/.lon) to its covering region.

    Items that also expose a writable ``region_id`` attribute (stay visits)
    get it filled in.  Unassigned items are collected, not dropped silently.
    """
    if not items:
        return Assignment(members={}, unassigned=[])
    lons = np.fromiter((it.lon for it in items), dtype=float, count=len(items))
    lats = np.fromiter((it.lat for it in items), dtype=float, count=len(items))
    ids = index.lookup_many(lons, lats)

    members: dict[str, list] = {}
    unassigned: list = []
    writable = hasattr(items[0], "region_id")
    for item, rid in zip(items, ids):
        if writable:
            item.region_id = rid
        if rid is None:
            unassigned.append(item)
        else:
            members.setdefault(rid, []).append(item)
    if unassigned:
        logger.info("%d of %d points fall outside all regions", len(unassigned), len(items))
    return Assignment(members=dict(sorted(members.items())), unassigned=unassigned)


@dataclass(frozen=True, slots=True)
class Poi:
    """A point of interest; the static counterpart of a stay visit."""

    poi_id: str
    category: str
    lat: float
    lon: float


class PoiCatalog:
    """Unique POIs, typically distilled from the check-in records."""

    def __init__(self, pois: Iterable[Poi]) -> None:
        self.pois: list[Poi] = sorted(pois, key=lambda p: p.poi_id)
        self.by_id: dict[str, Poi] = {p.poi_id: p for p in self.pois}
        if len(self.by_id) != len(self.pois):
            raise GeoError("duplicate poi_id in catalog")

    def __len__(self) -> int:
        return len(self.pois)

    @classmethod
    def from_records(cls, records: Iterable[MovementRecord]) -> "PoiCatalog":
        seen: dict[str, Poi] = {}
        for rec in records:
            if rec.poi_id not in seen:
                seen[rec.poi_id] = Poi(rec.poi_id, rec.category, rec.lat, rec.lon)
        return cls(seen.values())


def _bin_of_minutes(minutes: int, bin_width_minutes: int) -> int:
    return minutes // bin_width_minutes


def _window_keeps(visit, window: "TimeWindow | None") -> bool:
    if window is None:
        return True
    arrival = visit.arrival
    b = _bin_of_minutes(arrival.hour * 60 + arrival.minute, window.bin_width_minutes)
    return window.contains(b)


def category_counts(
    assignment: Assignment,
    taxonomy: CategoryTaxonomy,
    weighting: str = "poi_count",
    window: "TimeWindow | None" = None,
) -> dict[str, np.ndarray]:
    """Per-region raw category weight vectors (taxonomy order).

    ``poi_count`` weighs each member once; ``access_frequency`` weighs each
    visit once; ``stay_time`` weighs each visit by its stay duration.  The
    time window, when given, keeps only visits whose arrival bin falls in it.
    """
    if weighting not in _WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}; expected one of {_WEIGHTINGS}")
    out: dict[str, np.ndarray] = {}
    for rid, members in assignment.members.items():
        vec = np.zeros(taxonomy.size, dtype=float)
        for item in members:
            if weighting != "poi_count" and not _window_keeps(item, window):
                continue
            w = item.stay_seconds if weighting == "stay_time" else 1.0
            vec[taxonomy.index_of(item.category)] += w
        out[rid] = vec
    return out


@dataclass(frozen=True, slots=True)
class DensityVector:
    """A normalized category distribution for one region.

    Attributes:
        values: Probabilities in taxonomy order; all zero when support is 0.
        support: Total raw weight before normalization.
        weighting: Which weighting scheme produced it.
    """

    values: np.ndarray
    support: float
    weighting: str


def density_vector(
    region_id: str,
    assignment: Assignment,
    taxonomy: CategoryTaxonomy,
    weighting: str = "poi_count",
    window: "TimeWindow | None" = None,
) -> DensityVector:
    """Normalized category density of one region under a weighting scheme."""
    counts = category_counts(assignment, taxonomy, weighting, window)
    vec = counts.get(region_id, np.zeros(taxonomy.size, dtype=float))
    total = float(vec.sum())
    values = vec / total if total > 0 else vec
    return DensityVector(values=values, support=total, weighting=weighting)


def entropy(density) -> float:
    """Shannon entropy (natural log) of a density vector or probability array.

    Zero-probability entries contribute nothing; an all-zero vector has
    entropy 0 by convention.
    """
    values = density.values if isinstance(density, DensityVector) else np.asarray(density, float)
    total = values.sum()
    if total <= 0:
        return 0.0
    p = values / total
    nz = p[p > 0]
    # + 0.0 turns the -0.0 of a one-hot vector into a plain 0.0
    return float(-(nz * np.log(nz)).sum()) + 0.0


def entropy_of_counts(counts: np.ndarray) -> float:
    """Entropy of the distribution obtained by normalizing raw counts."""
    return entropy(np.asarray(counts, float))


def dominant_category(density: DensityVector, taxonomy: CategoryTaxonomy) -> str | None:
    """Most frequent category, or None when the region has no support.

    Ties resolve to the earliest category in taxonomy order.
    """
    if density.support <= 0:
        return None
    return taxonomy.categories[int(np.argmax(density.values))]
