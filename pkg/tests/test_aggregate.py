"""Entropy-gated cluster growth: merge rule, BFS passes, and hierarchy shape."""

import math
from datetime import date, datetime, timezone

import numpy as np
import pytest

from honflow import (
    AggregationConfig,
    CategoryTaxonomy,
    DayType,
    StaySequence,
    StayVisit,
    TimeWindow,
    bfs_aggregate,
    build_hierarchy,
    derive_adjacency,
    load_regions,
    merge_condition,
    merged_entropy,
    recompute_for_window,
)
from honflow.aggregate import config_fingerprint
from honflow.synth import make_grid_regions

TAX = CategoryTaxonomy.default()


def vec(cats):
    v = np.zeros(TAX.size, dtype=float)
    for name, weight in cats.items():
        v[TAX.index_of(name)] = float(weight)
    return v


def plain_entropy(counts):
    total = sum(counts)
    if total <= 0:
        return 0.0
    return -sum((c / total) * math.log(c / total) for c in counts if c > 0)


def row_regions(n):
    return derive_adjacency(load_regions(make_grid_regions(n, 1, cell_deg=0.01)))


def members_by_cluster(level):
    return {c.cluster_id: set(c.members) for c in level.clusters.values()}


def test_merged_entropy_reference_case():
    """Two regions, one balanced and one lopsided, pool into a skewed whole."""
    a = vec({"Food": 50, "Shop & Service": 50})
    b = vec({"Shop & Service": 1000})
    got = merged_entropy(a, b)
    assert got == pytest.approx(plain_entropy([50, 1050]), abs=1e-12)
    assert got == pytest.approx(0.18490739916777568, abs=1e-9)


def test_merge_condition_around_the_boundary():
    h_a = plain_entropy([50, 50])  # ln 2
    h_b = 0.0
    h_merged = plain_entropy([50, 1050])
    # mean/merged sits at about 1.874: merging is allowed just below, not above
    assert merge_condition(h_a, h_b, h_merged, alpha=1.8)
    assert not merge_condition(h_a, h_b, h_merged, alpha=1.9)


def test_identical_distributions_merge_at_alpha_one():
    a = vec({"Food": 30, "Residence": 10})
    b = vec({"Food": 3, "Residence": 1})  # same proportions, different mass
    h = plain_entropy([3, 1])
    assert merge_condition(h, h, merged_entropy(a, b), alpha=1.0)


def test_zero_entropy_neighbors_always_merge():
    assert merge_condition(0.0, 0.0, 0.0, alpha=100.0)


def test_bfs_pass_hand_traced_on_a_path():
    """Six cells in a row: Food,Food,Shop,Shop,Shop,Food with alpha=1, beta 1-3.

    Seeded at the lowest id, identical zero-entropy neighbors chain together;
    the mixed Food+Shop merge would raise entropy from zero and is refused.
    The Shop run hits the beta-max cap at three, and the far Food cell is
    boxed in by clustered neighbors, so it stays a singleton.
    """
    rs = row_regions(6)
    counts = {
        "r0000": vec({"Food": 10}),
        "r0001": vec({"Food": 10}),
        "r0002": vec({"Shop & Service": 10}),
        "r0003": vec({"Shop & Service": 10}),
        "r0004": vec({"Shop & Service": 10}),
        "r0005": vec({"Food": 10}),
    }
    config = AggregationConfig(alphas=(1.0,), beta_min=1, beta_max=3, levels=1)
    level = bfs_aggregate(rs, counts, config)
    assert members_by_cluster(level) == {
        "L1C0000": {"r0000", "r0001"},
        "L1C0001": {"r0002", "r0003", "r0004"},
        "L1C0002": {"r0005"},
    }
    assert level.pre_sweep_count == 3
    assert all(c.entropy == 0.0 for c in level.clusters.values())


def test_beta_max_caps_cluster_growth():
    rs = row_regions(5)
    counts = {rid: vec({"Food": 10}) for rid in rs.ids}
    config = AggregationConfig(alphas=(1.0,), beta_min=1, beta_max=3, levels=1)
    level = bfs_aggregate(rs, counts, config)
    assert sorted(len(c.members) for c in level.clusters.values()) == [2, 3]


def test_sweep_absorbs_undersized_clusters():
    rs = row_regions(3)
    counts = {"r0000": vec({"Food": 10}), "r0001": vec({"Food": 10}), "r0002": vec({"Shop & Service": 10})}
    config = AggregationConfig(alphas=(1.0,), beta_min=2, beta_max=3, levels=1)
    level = bfs_aggregate(rs, counts, config)
    # the lone Shop cell fails the entropy gate but is forced in afterwards
    assert level.pre_sweep_count == 2
    assert members_by_cluster(level) == {"L1C0000": {"r0000", "r0001", "r0002"}}
    assert level.clusters["L1C0000"].entropy == pytest.approx(plain_entropy([20, 10]), abs=1e-12)


def test_infinite_alpha_yields_singletons_before_sweep():
    rs = row_regions(4)
    counts = {rid: vec({"Food": 10}) for rid in rs.ids}
    config = AggregationConfig(alphas=(float("inf"),), beta_min=1, beta_max=4, levels=1)
    level = bfs_aggregate(rs, counts, config)
    assert level.pre_sweep_count == 4
    assert len(level.clusters) == 4


def connected(region_set, members):
    members = set(members)
    start = next(iter(members))
    seen = {start}
    frontier = [start]
    while frontier:
        rid = frontier.pop()
        for nb in region_set.by_id[rid].neighbors:
            if nb in members and nb not in seen:
                seen.add(nb)
                frontier.append(nb)
    return seen == members


@pytest.mark.parametrize("alpha", [1.0, 1.9, 2.5])
def test_partition_connectivity_and_beta_bounds(alpha):
    rs = derive_adjacency(load_regions(make_grid_regions(6, 6, cell_deg=0.01)))
    rng = np.random.default_rng(0)
    counts = {rid: rng.integers(0, 20, size=TAX.size).astype(float) for rid in rs.ids}
    config = AggregationConfig(alphas=(alpha,), beta_min=3, beta_max=9, levels=1)
    level = bfs_aggregate(rs, counts, config)
    seen = []
    for c in level.clusters.values():
        seen.extend(c.members)
        assert 3 <= len(c.members) <= 9
        assert connected(rs, c.members)
    assert sorted(seen) == rs.ids


def test_hierarchy_nesting_and_level_counts():
    rs = derive_adjacency(load_regions(make_grid_regions(6, 6, cell_deg=0.01)))
    rng = np.random.default_rng(1)
    counts = {rid: rng.integers(0, 20, size=TAX.size).astype(float) for rid in rs.ids}
    config = AggregationConfig(alphas=(1.0, 2.0), beta_min=3, beta_max=9, levels=2)
    h = build_hierarchy(rs, counts, config)
    l1, l2 = h.level(1), h.level(2)
    assert len(l2.clusters) <= len(l1.clusters)

    l1_members = members_by_cluster(l1)
    unit_owner = {}
    for c in l2.clusters.values():
        for unit in c.units:
            assert unit not in unit_owner
            unit_owner[unit] = c.cluster_id
        # a parent's member regions are exactly the union of its units'
        assert set(c.members) == set().union(*(l1_members[u] for u in c.units))
    assert sorted(unit_owner) == sorted(l1_members)

    with pytest.raises(IndexError):
        h.level(3)


def test_cluster_ids_encode_their_level():
    rs = row_regions(4)
    counts = {rid: vec({"Food": 1}) for rid in rs.ids}
    config = AggregationConfig(alphas=(1.0,), beta_min=1, beta_max=2, levels=2)
    h = build_hierarchy(rs, counts, config)
    assert [c.cluster_id for c in h.level(1).clusters.values()] == ["L1C0000", "L1C0001"]
    assert all(c.cluster_id.startswith("L2C") for c in h.level(2).clusters.values())


def test_config_validation():
    with pytest.raises(Exception):
        AggregationConfig(alphas=(), beta_min=3, beta_max=9, levels=1)
    with pytest.raises(Exception):
        AggregationConfig(alphas=(1.0,), beta_min=0, beta_max=9, levels=1)
    with pytest.raises(Exception):
        AggregationConfig(alphas=(1.0,), beta_min=9, beta_max=3, levels=1)
    config = AggregationConfig(alphas=(1.0, 2.0), beta_min=3, beta_max=9, levels=4)
    assert config.alpha_for(1) == 1.0
    assert config.alpha_for(4) == 2.0  # last alpha repeats for deeper levels


def test_config_fingerprint_is_stable_and_sensitive():
    a = AggregationConfig(alphas=(1.0,), beta_min=3, beta_max=9, levels=1)
    b = AggregationConfig(alphas=(1.1,), beta_min=3, beta_max=9, levels=1)
    assert config_fingerprint(a) == config_fingerprint(a)
    assert config_fingerprint(a) != config_fingerprint(b)
    assert config_fingerprint(a, weighting="poi_count") != config_fingerprint(a)


def wv(region_id, cat, hour, minute=30):
    arrival = datetime(2013, 7, 8, hour, minute, tzinfo=timezone.utc)
    return StayVisit("p" + region_id, cat, 0.0, 0.0, arrival, 600.0, 0.0, region_id=region_id)


def weekday_seq(*visits):
    return StaySequence("u", date(2013, 7, 8), list(visits), DayType.WEEKDAY)


def test_recompute_for_window_tracks_the_window():
    rs = row_regions(2)
    stays = [
        weekday_seq(wv("r0000", "Food", 8), wv("r0001", "Food", 8, 45)),
        weekday_seq(wv("r0000", "Food", 19), wv("r0001", "Shop & Service", 19, 45)),
    ]
    config = AggregationConfig(alphas=(1.0,), beta_min=1, beta_max=2, levels=1)

    morning = recompute_for_window(rs, stays, config, TAX, window=TimeWindow(7, 10))
    assert len(morning.level(1).clusters) == 1  # same category: free merge
    assert not morning.used_poi_fallback

    evening = recompute_for_window(rs, stays, config, TAX, window=TimeWindow(18, 21))
    assert len(evening.level(1).clusters) == 2  # Food vs Shop stays split


def test_recompute_empty_window_falls_back_to_poi_densities():
    rs = row_regions(2)
    stays = [weekday_seq(wv("r0000", "Food", 8), wv("r0001", "Shop & Service", 8, 45))]
    config = AggregationConfig(alphas=(1.0,), beta_min=1, beta_max=2, levels=1)
    poi_counts = {"r0000": vec({"Food": 3}), "r0001": vec({"Shop & Service": 3})}

    night = recompute_for_window(
        rs, stays, config, TAX, window=TimeWindow(2, 4), poi_counts=poi_counts
    )
    assert night.used_poi_fallback
    assert len(night.level(1).clusters) == 2


def test_recompute_respects_day_type():
    rs = row_regions(2)
    weekend = StaySequence(
        "u", date(2013, 7, 6),
        [wv("r0000", "Food", 8), wv("r0001", "Food", 8, 45)], DayType.WEEKEND,
    )
    config = AggregationConfig(alphas=(1.0,), beta_min=1, beta_max=2, levels=1)
    poi_counts = {"r0000": vec({"Food": 3}), "r0001": vec({"Food": 3})}
    h = recompute_for_window(
        rs, [weekend], config, TAX,
        window=TimeWindow(7, 10, day_type=DayType.WEEKDAY), poi_counts=poi_counts,
    )
    # no weekday visits exist, so the weekday view must use the fallback
    assert h.used_poi_fallback


def test_recompute_cache_returns_identical_objects():
    rs = row_regions(2)
    stays = [weekday_seq(wv("r0000", "Food", 8), wv("r0001", "Food", 8, 45))]
    config = AggregationConfig(alphas=(1.0,), beta_min=1, beta_max=2, levels=1)
    cache = {}
    first = recompute_for_window(rs, stays, config, TAX, window=TimeWindow(7, 10), cache=cache)
    again = recompute_for_window(rs, stays, config, TAX, window=TimeWindow(7, 10), cache=cache)
    assert first is again
    other = recompute_for_window(
        rs, stays, config, TAX, window=TimeWindow(7, 10), weighting="stay_time", cache=cache
    )
    assert other is not first
