"""Entropy-driven region aggregation and higher-order movement patterns.

The pipeline: parse check-ins into stay sequences (:mod:`honflow.ingest`),
project them onto regions (:mod:`honflow.geo`), merge regions into an
entropy-guided cluster hierarchy (:mod:`honflow.aggregate`), and mine
temporally windowed variable-order movement rules and patterns over the
clusters (:mod:`honflow.hon`).  :mod:`honflow.service` exposes the results
over HTTP and :mod:`honflow.cli` drives batch runs.
"""

from .aggregate import (
    AggregationConfig,
    Cluster,
    ClusterLevel,
    Hierarchy,
    bfs_aggregate,
    build_hierarchy,
    merge_condition,
    merged_entropy,
    recompute_for_window,
)
from .geo import (
    Assignment,
    DensityVector,
    Poi,
    PoiCatalog,
    Region,
    RegionSet,
    SpatialIndex,
    density_vector,
    derive_adjacency,
    dominant_category,
    entropy,
    entropy_of_counts,
    load_regions,
    project_points,
)
from .hon import (
    ClusterPath,
    HonRule,
    Pattern,
    TimeWindow,
    TransitionGraph,
    assemble_global_patterns,
    build_transition_graph,
    conditional_distribution,
    corpus_from_stays,
    count_path_traversals,
    edge_flow_histogram,
    first_order_prob,
    flow_by_order_stats,
    grow_rules,
    kld,
    local_patterns,
    pattern_entropy_rate,
)
from .ingest import (
    CategoryTaxonomy,
    DayType,
    GreatCircleProvider,
    HolidayCalendar,
    MovementRecord,
    ParseReport,
    StaySequence,
    StayVisit,
    Trajectory,
    build_trajectories,
    classify_day,
    estimate_stays,
    haversine_meters,
    parse_checkins,
)

__version__ = "0.1.0"
