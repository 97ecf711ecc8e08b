"""HTTP query service over a persisted analysis snapshot.

The service is read-only: it loads the normalized visit store produced by the
ingest command, recomputes window-specific hierarchies and rules on demand,
and persists every response body as a content-addressed JSON file so that
repeated queries (and queries across restarts) are byte-identical.  Swapping
a snapshot means pointing a fresh process at a new data directory.

Cluster ids are resolved against the hierarchy of the window being queried
(the whole day when no window applies), so ids returned by ``GET /regions``
for some window are valid in every other call carrying the same window.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import shapely
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import Response
from pydantic import BaseModel
from shapely.geometry import mapping as geom_mapping

from .aggregate import AggregationConfig, Hierarchy, config_fingerprint, recompute_for_window
from .config import RunConfig
from .geo import PoiCatalog, RegionSet, SpatialIndex, derive_adjacency, load_regions, project_points
from .hon import (
    ClusterPath,
    TimeWindow,
    assemble_global_patterns,
    build_transition_graph,
    corpus_from_stays,
    grow_rules,
    local_patterns,
)
from .ingest import CategoryTaxonomy, DayType, StaySequence, StayVisit

logger = logging.getLogger(__name__)

__all__ = ["Snapshot", "create_app", "canonical_json"]

DATA_DIR_ENV = "HONFLOW_DATA"
PORT_ENV = "HONFLOW_PORT"

_ROUND = 9


def canonical_json(payload) -> bytes:
    """Stable byte serialization: sorted keys, no whitespace."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _rounded(value: float) -> float:
    return round(float(value), _ROUND)


def _parse_day_type(raw: str | None) -> DayType | None:
    if raw is None or raw == "" or raw == "all":
        return None
    try:
        return DayType(raw)
    except ValueError:
        raise HTTPException(status_code=400, detail=f"unknown day_type {raw!r}")


def _parse_window(raw: str | None, day_type: DayType | None, bin_width: int) -> TimeWindow:
    if raw is None or raw == "":
        return TimeWindow.whole_day(day_type, bin_width)
    try:
        return TimeWindow.parse(raw, day_type=day_type, bin_width_minutes=bin_width)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))


def _round_coords(obj):
    if isinstance(obj, (list, tuple)):
        return [_round_coords(x) for x in obj]
    if isinstance(obj, float):
        return _rounded(obj)
    return obj


class Snapshot:
    """Immutable in-memory view of one ingested dataset directory."""

    def __init__(self, data_dir: str | Path) -> None:
        self.data_dir = Path(data_dir)
        required = ["config.json", "regions.geojson", "visits.jsonl", "taxonomy.json"]
        missing = [f for f in required if not (self.data_dir / f).exists()]
        if missing:
            raise FileNotFoundError(
                f"snapshot at {self.data_dir} is missing {missing}; "
                "run the ingest command first"
            )
        self.run_config = RunConfig.from_file(self.data_dir / "config.json")
        self.taxonomy = CategoryTaxonomy.from_file(self.data_dir / "taxonomy.json")
        self.regions: RegionSet = derive_adjacency(
            load_regions(self.data_dir / "regions.geojson"),
            self.run_config.adjacency_epsilon_m,
        )
        self.stays: list[StaySequence] = self._load_visits(self.data_dir / "visits.jsonl")
        self.agg_config: AggregationConfig = self.run_config.aggregation_config()
        self.bin_width = self.run_config.bin_width_minutes

        # visits carry poi_id/category/lat/lon, which is all a catalog needs
        self.catalog = PoiCatalog.from_records(v for seq in self.stays for v in seq.visits)
        index = SpatialIndex.build(self.regions)
        poi_assignment = project_points(index, self.catalog.pois)
        self.poi_counts: dict[str, np.ndarray] = {}
        self.poi_members: dict[str, list] = poi_assignment.members
        for rid, pois in poi_assignment.members.items():
            vec = np.zeros(self.taxonomy.size, dtype=float)
            for poi in pois:
                vec[self.taxonomy.index_of(poi.category)] += 1.0
            self.poi_counts[rid] = vec

        digest = hashlib.sha256()
        for name in ("regions.geojson", "visits.jsonl", "config.json", "taxonomy.json"):
            digest.update((self.data_dir / name).read_bytes())
        self.fingerprint = digest.hexdigest()[:16]
        self.dataset_id = self.data_dir.name

        self._hier_cache: dict[tuple, Hierarchy] = {}
        self._hier_lock = threading.Lock()

    @staticmethod
    def _load_visits(path: Path) -> list[StaySequence]:
        from datetime import date, datetime

        stays: list[StaySequence] = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                visits = [
                    StayVisit(
                        poi_id=v["poi_id"],
                        category=v["category"],
                        lat=v["lat"],
                        lon=v["lon"],
                        arrival=datetime.fromisoformat(v["arrival"]),
                        stay_seconds=v["stay_seconds"],
                        travel_seconds=v["travel_seconds"],
                        region_id=v.get("region_id"),
                        flagged=v.get("flagged", False),
                    )
                    for v in row["visits"]
                ]
                stays.append(
                    StaySequence(
                        user_id=row["user_id"],
                        day=date.fromisoformat(row["day"]),
                        visits=visits,
                        day_type=DayType(row["day_type"]) if row.get("day_type") else None,
                    )
                )
        return stays

    # -- derived structures, cached in-memory ---------------------------------

    def hierarchy(self, window: TimeWindow) -> Hierarchy:
        key = window.key()
        with self._hier_lock:
            hit = self._hier_cache.get(key)
        if hit is not None:
            return hit
        built = recompute_for_window(
            self.regions,
            self.stays,
            self.agg_config,
            self.taxonomy,
            window=window,
            weighting=self.run_config.weighting,
            poi_counts=self.poi_counts,
        )
        with self._hier_lock:
            return self._hier_cache.setdefault(key, built)

    def level_of(self, window: TimeWindow, level: int):
        hierarchy = self.hierarchy(window)
        try:
            return hierarchy, hierarchy.level(level)
        except IndexError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    def corpus(self, window: TimeWindow, level: int) -> list[ClusterPath]:
        _, lvl = self.level_of(window, level)
        return corpus_from_stays(
            self.stays, lvl.assignment(), day_type=window.day_type,
            bin_width_minutes=self.bin_width,
        )

    def day_types_present(self) -> list[str]:
        return sorted({seq.day_type.value for seq in self.stays if seq.day_type})


def _level_of_ids(cluster_ids: Iterable[str]) -> int:
    levels = set()
    for cid in cluster_ids:
        if not cid.startswith("L") or "C" not in cid:
            raise HTTPException(status_code=404, detail=f"unknown cluster id {cid!r}")
        try:
            levels.add(int(cid[1 : cid.index("C")]))
        except ValueError:
            raise HTTPException(status_code=404, detail=f"unknown cluster id {cid!r}")
    if len(levels) != 1:
        raise HTTPException(status_code=400, detail="selection mixes hierarchy levels")
    return levels.pop()


class LocalPatternsRequest(BaseModel):
    cluster_ids: list[str]
    window: str | None = None
    day_type: str | None = None
    min_flow: int = 1
    top_n: int | None = None


def create_app(data_dir: str | Path | None = None) -> FastAPI:
    """Build the API app over the snapshot in ``data_dir``.

    Falls back to the HONFLOW_DATA environment variable when no directory is
    given.  Raises FileNotFoundError for an unusable snapshot, so callers can
    fail fast before binding a port.
    """
    if data_dir is None:
        data_dir = os.environ.get(DATA_DIR_ENV)
    if not data_dir:
        raise FileNotFoundError(f"no data directory given and {DATA_DIR_ENV} unset")
    snap = Snapshot(data_dir)
    app = FastAPI(title="honflow", version="1.0")
    cache_dir = Path(snap.data_dir) / "cache"
    cache_dir.mkdir(exist_ok=True)
    response_locks: dict[str, threading.Lock] = {}
    master_lock = threading.Lock()

    def cached_response(kind: str, params: Mapping, build) -> Response:
        """Serve from the content-addressed store, computing at most once."""
        key_blob = canonical_json(
            {
                "dataset": snap.dataset_id,
                "fingerprint": snap.fingerprint,
                "config": config_fingerprint(
                    snap.agg_config,
                    weighting=snap.run_config.weighting,
                    bin_width=snap.bin_width,
                    min_support=snap.run_config.min_support,
                    max_order=snap.run_config.max_order,
                    kld_scale=snap.run_config.kld_threshold_scale,
                ),
                "kind": kind,
                "params": dict(params),
            }
        )
        key = hashlib.sha256(key_blob).hexdigest()
        path = cache_dir / f"{key}.json"
        with master_lock:
            lock = response_locks.setdefault(key, threading.Lock())
        with lock:
            if not path.exists():
                body = canonical_json(build())
                tmp = path.with_suffix(".tmp")
                tmp.write_bytes(body)
                tmp.replace(path)
            data = path.read_bytes()
        return Response(content=data, media_type="application/json")

    # -- endpoints -------------------------------------------------------------

    @app.get("/api/v1/health")
    def health():
        return {"status": "ok", "dataset": snap.dataset_id}

    @app.get("/api/v1/datasets")
    def datasets() -> Response:
        def build():
            return {
                "datasets": [
                    {
                        "id": snap.dataset_id,
                        "regions": len(snap.regions),
                        "sequences": len(snap.stays),
                        "visits": sum(len(s.visits) for s in snap.stays),
                        "pois": len(snap.catalog),
                        "day_types": snap.day_types_present(),
                        "levels": snap.agg_config.levels,
                        "bins_per_day": (24 * 60) // snap.bin_width,
                        "bin_width_minutes": snap.bin_width,
                        "categories": list(snap.taxonomy.categories),
                        "fingerprint": snap.fingerprint,
                    }
                ]
            }

        return cached_response("datasets", {}, build)

    @app.get("/api/v1/regions")
    def regions(
        level: int = Query(default=1, ge=1),
        window: str | None = None,
        day_type: str | None = None,
    ) -> Response:
        dt = _parse_day_type(day_type)
        win = _parse_window(window, dt, snap.bin_width)
        params = {"level": level, "window": win.encode(), "day_type": day_type or "all"}

        def build():
            hierarchy, lvl = snap.level_of(win, level)
            features = []
            for cid, cluster in lvl.clusters.items():
                polys = [snap.regions.by_id[r].polygon for r in cluster.members]
                merged = shapely.union_all(polys)
                total = float(cluster.counts.sum())
                dominant = (
                    snap.taxonomy.categories[int(np.argmax(cluster.counts))]
                    if total > 0
                    else None
                )
                features.append(
                    {
                        "type": "Feature",
                        "properties": {
                            "cluster_id": cid,
                            "level": level,
                            "size": len(cluster.units),
                            "member_regions": sorted(cluster.members),
                            "entropy": _rounded(cluster.entropy),
                            "dominant_category": dominant,
                            "support": _rounded(total),
                            "centroid": [
                                _rounded(cluster.centroid[0]),
                                _rounded(cluster.centroid[1]),
                            ],
                        },
                        "geometry": _round_coords(geom_mapping(merged)),
                    }
                )
            return {
                "type": "FeatureCollection",
                "features": features,
                "meta": {
                    "window": win.encode(),
                    "day_type": day_type or "all",
                    "level": level,
                    "cluster_count": len(lvl.clusters),
                    "used_poi_fallback": hierarchy.used_poi_fallback,
                },
            }

        return cached_response("regions", params, build)

    @app.get("/api/v1/timeline")
    def timeline(selection: str | None = None, day_type: str | None = None) -> Response:
        dt = _parse_day_type(day_type)
        win = TimeWindow.whole_day(dt, snap.bin_width)
        selected = tuple(s for s in (selection or "").split(",") if s)
        level = _level_of_ids(selected) if selected else 1
        params = {"selection": ",".join(selected), "day_type": day_type or "all"}

        def build():
            hierarchy, lvl = snap.level_of(win, level)
            unknown = [c for c in selected if c not in lvl.clusters]
            if unknown:
                raise HTTPException(status_code=404, detail=f"unknown clusters {unknown}")
            assignment = lvl.assignment()
            graph = build_transition_graph(
                snap.stays, assignment, day_type=dt, bin_width_minutes=snap.bin_width
            )
            dominant = {
                cid: (
                    snap.taxonomy.categories[int(np.argmax(c.counts))]
                    if float(c.counts.sum()) > 0
                    else None
                )
                for cid, c in lvl.clusters.items()
            }
            bins_per_day = win.bins_per_day
            sel = set(selected)

            def empty_bins():
                return [
                    {"bin": b, "total": 0, "by_category": {}} for b in range(bins_per_day)
                ]

            if not sel:
                bins = empty_bins()
                for (src, dst, b), n in graph.edges.items():
                    bins[b]["total"] += n
                    cat = dominant.get(dst) or "uncategorized"
                    bins[b]["by_category"][cat] = bins[b]["by_category"].get(cat, 0) + n
                for row in bins:
                    row["by_category"] = dict(sorted(row["by_category"].items()))
                return {
                    "day_type": day_type or "all",
                    "selection": [],
                    "bins": bins,
                    "total": graph.total_weight(),
                }

            inbound, outbound = empty_bins(), empty_bins()
            for (src, dst, b), n in graph.edges.items():
                if dst in sel and src not in sel:
                    row = inbound[b]
                    cat = dominant.get(src) or "uncategorized"
                elif src in sel and dst not in sel:
                    row = outbound[b]
                    cat = dominant.get(dst) or "uncategorized"
                else:
                    continue
                row["total"] += n
                row["by_category"][cat] = row["by_category"].get(cat, 0) + n
            for rows in (inbound, outbound):
                for row in rows:
                    row["by_category"] = dict(sorted(row["by_category"].items()))
            return {
                "day_type": day_type or "all",
                "selection": sorted(sel),
                "in": inbound,
                "out": outbound,
                "total_in": sum(r["total"] for r in inbound),
                "total_out": sum(r["total"] for r in outbound),
            }

        return cached_response("timeline", params, build)

    def _pattern_payload(pats, centroids: Mapping[str, tuple[float, float]]):
        rows = []
        for p in pats:
            active = [
                b
                for hist in p.edge_bins
                for b, v in enumerate(hist)
                if v > 0
            ]
            rows.append(
                {
                    "path": list(p.path),
                    "order": p.order,
                    "flow": p.flow,
                    "entropy_rate": _rounded(p.entropy_rate),
                    "mode": p.mode,
                    "window": p.window.encode(),
                    "bin_range": [min(active), max(active)] if active else None,
                    "edge_bins": [list(h) for h in p.edge_bins],
                    "centroids": [
                        [_rounded(centroids[c][0]), _rounded(centroids[c][1])]
                        if c in centroids
                        else None
                        for c in p.path
                    ],
                }
            )
        return rows

    @app.get("/api/v1/patterns/global")
    def patterns_global(
        day_type: str | None = None,
        top_n: int | None = None,
        level: int = Query(default=1, ge=1),
        window: str | None = None,
    ) -> Response:
        dt = _parse_day_type(day_type)
        win = _parse_window(window, dt, snap.bin_width)
        params = {
            "day_type": day_type or "all",
            "top_n": top_n,
            "level": level,
            "window": win.encode(),
        }

        def build():
            _, lvl = snap.level_of(win, level)
            corpus = corpus_from_stays(
                snap.stays, lvl.assignment(), day_type=dt, bin_width_minutes=snap.bin_width
            )
            rules = grow_rules(
                corpus,
                win,
                min_support=snap.run_config.min_support,
                max_order=snap.run_config.max_order,
                kld_scale=snap.run_config.kld_threshold_scale,
            )
            pats = assemble_global_patterns(rules, corpus, win, top_n=top_n)
            centroids = {cid: c.centroid for cid, c in lvl.clusters.items()}
            return {
                "day_type": day_type or "all",
                "window": win.encode(),
                "level": level,
                "patterns": _pattern_payload(pats, centroids),
            }

        return cached_response("patterns_global", params, build)

    @app.post("/api/v1/patterns/local")
    def patterns_local(req: LocalPatternsRequest) -> Response:
        if not req.cluster_ids:
            raise HTTPException(status_code=400, detail="empty selection")
        dt = _parse_day_type(req.day_type)
        win = _parse_window(req.window, dt, snap.bin_width)
        level = _level_of_ids(req.cluster_ids)
        selection = sorted(set(req.cluster_ids))
        params = {
            "cluster_ids": selection,
            "window": win.encode(),
            "day_type": req.day_type or "all",
            "min_flow": req.min_flow,
            "top_n": req.top_n,
        }

        def build():
            _, lvl = snap.level_of(win, level)
            unknown = [c for c in selection if c not in lvl.clusters]
            if unknown:
                raise HTTPException(status_code=404, detail=f"unknown clusters {unknown}")
            corpus = corpus_from_stays(
                snap.stays, lvl.assignment(), day_type=dt, bin_width_minutes=snap.bin_width
            )
            pats = local_patterns(
                corpus,
                selection,
                win,
                min_flow=req.min_flow,
                min_support=snap.run_config.min_support,
                max_order=snap.run_config.max_order,
            )
            if req.top_n is not None:
                pats = pats[: max(req.top_n, 0)]
            centroids = {cid: c.centroid for cid, c in lvl.clusters.items()}
            merged_id = "sel:" + "+".join(selection) if len(selection) > 1 else None
            if merged_id:
                sel_members = [c for cid in selection for c in lvl.clusters[cid].members]
                lons = [snap.regions.by_id[r].centroid[0] for r in sel_members]
                lats = [snap.regions.by_id[r].centroid[1] for r in sel_members]
                centroids = dict(centroids)
                centroids[merged_id] = (float(np.mean(lons)), float(np.mean(lats)))
            return {
                "selection": selection,
                "merged_id": merged_id,
                "window": win.encode(),
                "day_type": req.day_type or "all",
                "level": level,
                "patterns": _pattern_payload(pats, centroids),
            }

        return cached_response("patterns_local", params, build)

    @app.get("/api/v1/regions/{cluster_id}/stats")
    def region_stats(
        cluster_id: str,
        window: str | None = None,
        day_type: str | None = None,
        sort: str = "poi",
    ) -> Response:
        if sort not in ("poi", "access"):
            raise HTTPException(status_code=400, detail="sort must be 'poi' or 'access'")
        dt = _parse_day_type(day_type)
        win = _parse_window(window, dt, snap.bin_width)
        level = _level_of_ids([cluster_id])
        params = {
            "cluster_id": cluster_id,
            "window": win.encode(),
            "day_type": day_type or "all",
            "sort": sort,
        }

        def build():
            _, lvl = snap.level_of(win, level)
            cluster = lvl.clusters.get(cluster_id)
            if cluster is None:
                raise HTTPException(status_code=404, detail=f"unknown cluster {cluster_id!r}")
            member_set = set(cluster.members)

            poi_vec = np.zeros(snap.taxonomy.size, dtype=float)
            for rid in cluster.members:
                vec = snap.poi_counts.get(rid)
                if vec is not None:
                    poi_vec += vec

            access_vec = np.zeros(snap.taxonomy.size, dtype=float)
            for seq in snap.stays:
                if dt is not None and seq.day_type != dt:
                    continue
                for v in seq.visits:
                    if v.region_id not in member_set:
                        continue
                    b = (v.arrival.hour * 60 + v.arrival.minute) // snap.bin_width
                    if win.contains(b):
                        access_vec[snap.taxonomy.index_of(v.category)] += 1.0

            def share(vec: np.ndarray) -> dict[str, float]:
                total = float(vec.sum())
                if total <= 0:
                    return {}
                return {
                    cat: _rounded(vec[i] / total)
                    for i, cat in enumerate(snap.taxonomy.categories)
                    if vec[i] > 0
                }

            poi_share, access_share = share(poi_vec), share(access_vec)
            basis = poi_share if sort == "poi" else access_share
            order = sorted(basis, key=lambda c: (-basis[c], c))
            return {
                "cluster_id": cluster_id,
                "window": win.encode(),
                "day_type": day_type or "all",
                "poi_share": poi_share,
                "access_share": access_share,
                "poi_support": _rounded(float(poi_vec.sum())),
                "access_support": _rounded(float(access_vec.sum())),
                "zero_support": float(access_vec.sum()) == 0.0,
                "sort": sort,
                "category_order": order,
            }

        return cached_response("region_stats", params, build)

    app.state.snapshot = snap
    return app
