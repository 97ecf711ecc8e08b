"""Entropy-driven hierarchical aggregation of regions into clusters.

Neighboring units merge while the merge keeps the combined category
distribution "simple enough": the mean of the two member entropies must be at
least α times the entropy of the merged distribution.  Larger α makes merging
harder.  A post-pass sweeps undersized clusters into neighbors so cluster
sizes land inside [β_min, β_max], and the whole procedure stacks into a
hierarchy by re-running it on the clusters of the previous level.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, MutableMapping, Sequence

import numpy as np

from .geo import RegionSet, entropy_of_counts
from .hon import TimeWindow
from .ingest import CategoryTaxonomy, StaySequence

logger = logging.getLogger(__name__)

__all__ = [
    "AggregationConfig",
    "Cluster",
    "ClusterLevel",
    "Hierarchy",
    "merge_condition",
    "merged_entropy",
    "bfs_aggregate",
    "build_hierarchy",
    "recompute_for_window",
    "config_fingerprint",
]

# Slack on the merge inequality so exact-equality cases (identical
# distributions at alpha = 1) are not lost to float rounding.
MERGE_EPS = 1e-12

DEFAULT_ALPHA = 1.9
DEFAULT_BETA_MIN = 3
DEFAULT_BETA_MAX = 9

# A reasonable multi-scale schedule: each level merges a little less eagerly.
DEFAULT_ALPHA_SCHEDULE = (1.9, 2.2, 2.5)


@dataclass(frozen=True, slots=True)
class AggregationConfig:
    """Knobs of one aggregation run.

    ``alphas`` gives the per-level merge strictness; the last entry repeats
    for deeper levels, so a single value means one α everywhere.
    """

    alphas: tuple[float, ...] = (DEFAULT_ALPHA,)
    beta_min: int = DEFAULT_BETA_MIN
    beta_max: int = DEFAULT_BETA_MAX
    levels: int = 3

    def __post_init__(self) -> None:
        if not self.alphas or any(a <= 0 for a in self.alphas):
            raise ValueError("alphas must be non-empty and positive")
        if not (1 <= self.beta_min <= self.beta_max):
            raise ValueError("need 1 <= beta_min <= beta_max")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")

    def alpha_for(self, level: int) -> float:
        return self.alphas[min(level, len(self.alphas)) - 1]


def config_fingerprint(config: AggregationConfig, **extra) -> str:
    """Stable hash of a config (plus any extra knobs) for cache keys."""
    payload = {
        "alphas": list(config.alphas),
        "beta_min": config.beta_min,
        "beta_max": config.beta_max,
        "levels": config.levels,
        **extra,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def merge_condition(
    entropy_i: float, entropy_j: float, entropy_merged: float, alpha: float
) -> bool:
    """True when two units may merge: mean entropy ≥ α · merged entropy."""
    return 0.5 * (entropy_i + entropy_j) + MERGE_EPS >= alpha * entropy_merged


def merged_entropy(counts_i: np.ndarray, counts_j: np.ndarray) -> float:
    """Entropy of the count-weighted combination of two category vectors."""
    return entropy_of_counts(np.asarray(counts_i, float) + np.asarray(counts_j, float))


@dataclass(slots=True)
class Cluster:
    """One cluster at one level.

    ``members`` are base region ids; ``units`` are the previous-level ids
    merged here (equal to ``members`` at level 1).
    """

    cluster_id: str
    members: tuple[str, ...]
    units: tuple[str, ...]
    counts: np.ndarray
    entropy: float
    centroid: tuple[float, float]


@dataclass(slots=True)
class ClusterLevel:
    """All clusters of one level, keyed by cluster id (sorted)."""

    level: int
    clusters: dict[str, Cluster]
    pre_sweep_count: int

    def assignment(self) -> dict[str, str]:
        """base region_id → cluster_id."""
        out: dict[str, str] = {}
        for cid, cluster in self.clusters.items():
            for rid in cluster.members:
                out[rid] = cid
        return out


@dataclass(slots=True)
class Hierarchy:
    """Stack of cluster levels, level 1 = finest."""

    levels: list[ClusterLevel]
    config: AggregationConfig
    window: TimeWindow | None = None
    used_poi_fallback: bool = False

    def level(self, k: int) -> ClusterLevel:
        if not 1 <= k <= len(self.levels):
            raise IndexError(f"level {k} outside 1..{len(self.levels)}")
        return self.levels[k - 1]

    def assignment_of(self, k: int) -> dict[str, str]:
        return self.level(k).assignment()

    def to_dict(self, taxonomy: CategoryTaxonomy) -> dict:
        """JSON-ready form: levels → clusters with members and summaries."""
        levels = []
        for lvl in self.levels:
            clusters = []
            for cid, c in lvl.clusters.items():
                total = float(c.counts.sum())
                dominant = (
                    taxonomy.categories[int(np.argmax(c.counts))] if total > 0 else None
                )
                clusters.append(
                    {
                        "cluster_id": cid,
                        "members": sorted(c.members),
                        "size": len(c.units),
                        "entropy": round(c.entropy, 12),
                        "dominant_category": dominant,
                        "support": total,
                        "centroid": [round(c.centroid[0], 9), round(c.centroid[1], 9)],
                    }
                )
            levels.append(
                {
                    "level": lvl.level,
                    "cluster_count": len(lvl.clusters),
                    "pre_sweep_count": lvl.pre_sweep_count,
                    "clusters": clusters,
                }
            )
        return {
            "levels": levels,
            "config": {
                "alphas": list(self.config.alphas),
                "beta_min": self.config.beta_min,
                "beta_max": self.config.beta_max,
                "levels": self.config.levels,
            },
            "window": self.window.encode() if self.window else None,
            "day_type": (
                self.window.day_type.value if self.window and self.window.day_type else None
            ),
            "used_poi_fallback": self.used_poi_fallback,
        }


def _components(units: Sequence[str], adjacency: Mapping[str, set[str]]) -> dict[str, int]:
    """Connected-component id per unit (ids arbitrary but deterministic)."""
    comp: dict[str, int] = {}
    nxt = 0
    for seed in sorted(units):
        if seed in comp:
            continue
        queue = deque([seed])
        comp[seed] = nxt
        while queue:
            u = queue.popleft()
            for v in sorted(adjacency.get(u, ())):
                if v in comp or v not in set(units):
                    continue
                comp[v] = nxt
                queue.append(v)
        nxt += 1
    return comp


def _grow_clusters(
    units: Sequence[str],
    adjacency: Mapping[str, set[str]],
    counts: Mapping[str, np.ndarray],
    alpha: float,
    beta_max: int,
) -> list[list[str]]:
    """Greedy BFS growth: absorb neighbors while the merge condition holds.

    Seeds are taken in ascending unit id; each candidate is tested once per
    growing cluster, and a rejected candidate stays free to seed or join
    another cluster later.
    """
    taken: set[str] = set()
    grown: list[list[str]] = []
    for seed in sorted(units):
        if seed in taken:
            continue
        taken.add(seed)
        members = [seed]
        agg = np.asarray(counts[seed], float).copy()
        h_agg = entropy_of_counts(agg)
        queue = deque(sorted(n for n in adjacency.get(seed, ()) if n not in taken))
        enqueued = set(queue)
        while queue and len(members) < beta_max:
            cand = queue.popleft()
            enqueued.discard(cand)
            if cand in taken:
                continue
            cand_counts = np.asarray(counts[cand], float)
            h_cand = entropy_of_counts(cand_counts)
            merged = agg + cand_counts
            h_merged = entropy_of_counts(merged)
            if merge_condition(h_agg, h_cand, h_merged, alpha):
                taken.add(cand)
                members.append(cand)
                agg = merged
                h_agg = h_merged
                for nb in sorted(adjacency.get(cand, ())):
                    if nb not in taken and nb not in enqueued:
                        queue.append(nb)
                        enqueued.add(nb)
        grown.append(members)
    return grown


def _split_oversized(
    units: list[str],
    adjacency: Mapping[str, set[str]],
    beta_min: int,
    beta_max: int,
) -> tuple[list[str], list[str]] | None:
    """Split a connected unit list into two connected in-bound parts.

    Tries BFS-grown parts of every feasible size from every seed and returns
    the first split whose remainder is also connected; None when impossible.
    """
    n = len(units)
    unit_set = set(units)

    def is_connected(sub: set[str]) -> bool:
        if not sub:
            return False
        start = min(sub)
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adjacency.get(u, ()):
                if v in sub and v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == len(sub)

    sizes = [k for k in range(beta_min, beta_max + 1) if beta_min <= n - k <= beta_max]
    for k in sizes:
        for seed in sorted(units):
            part = [seed]
            part_set = {seed}
            queue = deque(sorted(v for v in adjacency.get(seed, ()) if v in unit_set))
            enq = set(queue)
            while queue and len(part) < k:
                u = queue.popleft()
                enq.discard(u)
                if u in part_set:
                    continue
                part.append(u)
                part_set.add(u)
                for v in sorted(adjacency.get(u, ())):
                    if v in unit_set and v not in part_set and v not in enq:
                        queue.append(v)
                        enq.add(v)
            if len(part) != k:
                continue
            rest = unit_set - part_set
            if is_connected(rest):
                return sorted(part), sorted(rest)
    return None


def _sweep_undersized(
    grown: list[list[str]],
    adjacency: Mapping[str, set[str]],
    counts: Mapping[str, np.ndarray],
    beta_min: int,
    beta_max: int,
) -> list[list[str]]:
    """Merge undersized clusters into neighbors until sizes are in bounds.

    The smallest undersized cluster (ties: lowest creation index) merges into
    the adjacent cluster with the least entropy increase, preferring targets
    that keep the result within beta_max; when none can, the merge happens
    anyway and the oversized result is split back into two connected in-bound
    parts.  A cluster covering its entire connected component is exempt.
    """
    clusters: dict[int, list[str]] = {i: list(m) for i, m in enumerate(grown)}
    cluster_counts: dict[int, np.ndarray] = {
        i: sum((np.asarray(counts[u], float) for u in m), np.zeros_like(np.asarray(counts[m[0]], float)))
        for i, m in clusters.items()
    }
    all_units = [u for m in grown for u in m]
    comp = _components(all_units, adjacency)
    comp_sizes: dict[int, int] = {}
    for u, c in comp.items():
        comp_sizes[c] = comp_sizes.get(c, 0) + 1
    next_id = len(grown)

    def owner_of() -> dict[str, int]:
        return {u: i for i, m in clusters.items() for u in m}

    while True:
        undersized = [
            i
            for i, m in clusters.items()
            if len(m) < beta_min and len(m) != comp_sizes[comp[m[0]]]
        ]
        if not undersized:
            break
        undersized.sort(key=lambda i: (len(clusters[i]), i))
        src = undersized[0]
        owners = owner_of()
        neighbor_ids = sorted(
            {
                owners[v]
                for u in clusters[src]
                for v in adjacency.get(u, ())
                if v in owners and owners[v] != src
            }
        )
        if not neighbor_ids:  # whole component already, should be exempt
            break

        def delta(i: int) -> float:
            h_before = entropy_of_counts(cluster_counts[i])
            h_after = entropy_of_counts(cluster_counts[i] + cluster_counts[src])
            return h_after - h_before

        in_bound = [
            i for i in neighbor_ids if len(clusters[i]) + len(clusters[src]) <= beta_max
        ]
        pool = in_bound if in_bound else neighbor_ids
        target = min(pool, key=lambda i: (delta(i), i))

        merged_units = clusters[target] + clusters[src]
        merged_counts = cluster_counts[target] + cluster_counts[src]
        del clusters[src], cluster_counts[src]
        clusters[target] = merged_units
        cluster_counts[target] = merged_counts

        if len(merged_units) > beta_max:
            split = _split_oversized(merged_units, adjacency, beta_min, beta_max)
            if split is None:
                logger.warning(
                    "cluster of %d units exceeds beta_max=%d and has no connected "
                    "in-bound split; keeping it oversized",
                    len(merged_units),
                    beta_max,
                )
            else:
                part_a, part_b = split
                del clusters[target], cluster_counts[target]
                for part in (part_a, part_b):
                    clusters[next_id] = list(part)
                    cluster_counts[next_id] = sum(
                        (np.asarray(counts[u], float) for u in part),
                        np.zeros_like(merged_counts),
                    )
                    next_id += 1
    return [clusters[i] for i in sorted(clusters)]


def _build_level(
    level: int,
    unit_lists: list[list[str]],
    pre_sweep_count: int,
    counts: Mapping[str, np.ndarray],
    unit_members: Mapping[str, tuple[str, ...]],
    base_centroids: Mapping[str, tuple[float, float]],
) -> ClusterLevel:
    ordered = sorted(unit_lists, key=lambda m: min(m))
    clusters: dict[str, Cluster] = {}
    for idx, units in enumerate(ordered):
        cid = f"L{level}C{idx:04d}"
        members = tuple(sorted(r for u in units for r in unit_members[u]))
        agg = np.sum([np.asarray(counts[u], float) for u in units], axis=0)
        lons = [base_centroids[r][0] for r in members]
        lats = [base_centroids[r][1] for r in members]
        clusters[cid] = Cluster(
            cluster_id=cid,
            members=members,
            units=tuple(sorted(units)),
            counts=agg,
            entropy=entropy_of_counts(agg),
            centroid=(float(np.mean(lons)), float(np.mean(lats))),
        )
    return ClusterLevel(level=level, clusters=clusters, pre_sweep_count=pre_sweep_count)


def _aggregate_pass(
    level: int,
    unit_ids: Sequence[str],
    adjacency: Mapping[str, set[str]],
    counts: Mapping[str, np.ndarray],
    config: AggregationConfig,
    unit_members: Mapping[str, tuple[str, ...]],
    base_centroids: Mapping[str, tuple[float, float]],
) -> ClusterLevel:
    alpha = config.alpha_for(level)
    if math.isinf(alpha):
        grown = [[u] for u in sorted(unit_ids)]
    else:
        grown = _grow_clusters(unit_ids, adjacency, counts, alpha, config.beta_max)
    pre_sweep = len(grown)
    swept = _sweep_undersized(grown, adjacency, counts, config.beta_min, config.beta_max)
    return _build_level(level, swept, pre_sweep, counts, unit_members, base_centroids)


def bfs_aggregate(
    regions: RegionSet,
    counts: Mapping[str, np.ndarray],
    config: AggregationConfig,
    level: int = 1,
) -> ClusterLevel:
    """One aggregation pass over base regions.

    ``counts`` maps region_id → raw category count vector; regions absent
    from it get zero vectors (entropy 0, so they merge with anything).
    """
    dim = len(next(iter(counts.values()))) if counts else 1
    full = {rid: np.asarray(counts.get(rid, np.zeros(dim)), float) for rid in regions.ids}
    unit_members = {rid: (rid,) for rid in regions.ids}
    return _aggregate_pass(
        level, regions.ids, regions.adjacency(), full, config, unit_members,
        regions.centroids(),
    )


def _lift(
    level: ClusterLevel, adjacency: Mapping[str, set[str]]
) -> tuple[list[str], dict[str, set[str]], dict[str, np.ndarray], dict[str, tuple[str, ...]]]:
    """Derive the next level's units/adjacency/counts from a built level."""
    owner: dict[str, str] = {}
    for cid, c in level.clusters.items():
        for u in c.units:
            owner[u] = cid
    up_adj: dict[str, set[str]] = {cid: set() for cid in level.clusters}
    for u, nbrs in adjacency.items():
        cu = owner.get(u)
        if cu is None:
            continue
        for v in nbrs:
            cv = owner.get(v)
            if cv is not None and cv != cu:
                up_adj[cu].add(cv)
                up_adj[cv].add(cu)
    units = sorted(level.clusters)
    counts = {cid: c.counts.copy() for cid, c in level.clusters.items()}
    members = {cid: c.members for cid, c in level.clusters.items()}
    return units, up_adj, counts, members


def build_hierarchy(
    regions: RegionSet,
    counts: Mapping[str, np.ndarray],
    config: AggregationConfig,
    window: TimeWindow | None = None,
) -> Hierarchy:
    """Run aggregation passes level by level into a nested hierarchy.

    Level k+1 clusters the clusters of level k with the level-specific α;
    cluster counts are therefore non-increasing with level, and every level
    partitions the base regions.
    """
    dim = len(next(iter(counts.values()))) if counts else 1
    unit_ids: Sequence[str] = regions.ids
    adjacency = regions.adjacency()
    unit_counts: Mapping[str, np.ndarray] = {
        rid: np.asarray(counts.get(rid, np.zeros(dim)), float) for rid in regions.ids
    }
    unit_members: Mapping[str, tuple[str, ...]] = {rid: (rid,) for rid in regions.ids}
    base_centroids = regions.centroids()

    levels: list[ClusterLevel] = []
    for lvl in range(1, config.levels + 1):
        built = _aggregate_pass(
            lvl, unit_ids, adjacency, unit_counts, config, unit_members, base_centroids
        )
        levels.append(built)
        unit_ids, adjacency, unit_counts, unit_members = _lift(built, adjacency)
    return Hierarchy(levels=levels, config=config, window=window)


def recompute_for_window(
    regions: RegionSet,
    stays: Sequence[StaySequence],
    config: AggregationConfig,
    taxonomy: CategoryTaxonomy,
    window: TimeWindow | None = None,
    weighting: str = "access_frequency",
    poi_counts: Mapping[str, np.ndarray] | None = None,
    cache: MutableMapping | None = None,
) -> Hierarchy:
    """Build the hierarchy for one time window's visit densities.

    Visits are kept when their sequence matches the window's day type and
    their arrival bin falls inside the window.  A window with no visits at
    all falls back to static POI-count densities (flagged on the result).
    Identical (window, config, weighting) calls served from ``cache`` return
    the same object.
    """
    key = None
    if cache is not None:
        key = (
            window.key() if window else None,
            config_fingerprint(config, weighting=weighting),
        )
        hit = cache.get(key)
        if hit is not None:
            return hit

    counts: dict[str, np.ndarray] = {}
    total = 0.0
    for seq in stays:
        if window is not None and window.day_type is not None and seq.day_type != window.day_type:
            continue
        for visit in seq.visits:
            if visit.region_id is None:
                continue
            if window is not None:
                b = (visit.arrival.hour * 60 + visit.arrival.minute) // window.bin_width_minutes
                if not window.contains(b):
                    continue
            vec = counts.get(visit.region_id)
            if vec is None:
                vec = np.zeros(taxonomy.size, dtype=float)
                counts[visit.region_id] = vec
            w = visit.stay_seconds if weighting == "stay_time" else 1.0
            vec[taxonomy.index_of(visit.category)] += w
            total += w

    used_fallback = False
    if total == 0:
        used_fallback = True
        counts = dict(poi_counts) if poi_counts else {}
        logger.warning(
            "window %s has no visits; falling back to POI-count densities",
            window.encode() if window else "all",
        )

    hierarchy = build_hierarchy(regions, counts, config, window=window)
    hierarchy.used_poi_fallback = used_fallback
    if cache is not None and key is not None:
        cache[key] = hierarchy
    return hierarchy
