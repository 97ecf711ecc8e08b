"""Temporally windowed higher-order movement patterns.

Movement corpora are sequences of cluster visits.  A fixed-order transition
graph only captures where people go next; here we also grow variable-order
rules: a longer context (the last few clusters visited) is kept only when it
shifts the distribution over the next cluster enough to justify itself, as
measured by KL divergence against the one-step-shorter context.  All
distributions are restricted to a time-of-day window applied to the departure
time of the transition being predicted.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import DayType, StaySequence

logger = logging.getLogger(__name__)

__all__ = [
    "TimeWindow",
    "ClusterPath",
    "TransitionGraph",
    "HonRule",
    "Pattern",
    "bin_of",
    "corpus_from_stays",
    "build_transition_graph",
    "first_order_prob",
    "conditional_distribution",
    "kld",
    "grow_rules",
    "count_path_traversals",
    "assemble_global_patterns",
    "local_patterns",
    "merge_selection",
    "pattern_entropy_rate",
    "edge_flow_histogram",
    "flow_by_order_stats",
]

DEFAULT_BIN_WIDTH_MINUTES = 60
DEFAULT_MIN_SUPPORT = 5
DEFAULT_MAX_ORDER = 3

# Patterns are rendered as short chains; paths longer than this are never
# assembled even if deeper rules exist.
MAX_PATTERN_PATH_LEN = 4

_KLD_EPS = 1e-12


@dataclass(frozen=True, slots=True)
class TimeWindow:
    """Half-open range of time-of-day bins, optionally tied to a day type.

    ``start_bin``/``end_bin`` index bins of ``bin_width_minutes`` within a
    day; the window covers bins start..end-1.  The string form is
    "start-end", e.g. "7-10" for 07:00-10:00 at 60-minute bins.
    """

    start_bin: int
    end_bin: int
    day_type: DayType | None = None
    bin_width_minutes: int = DEFAULT_BIN_WIDTH_MINUTES

    def __post_init__(self) -> None:
        if (24 * 60) % self.bin_width_minutes != 0:
            raise ValueError("bin width must divide the day evenly")
        if not (0 <= self.start_bin < self.end_bin <= self.bins_per_day):
            raise ValueError(
                f"bad window {self.start_bin}-{self.end_bin} "
                f"for {self.bins_per_day} bins/day"
            )

    @property
    def bins_per_day(self) -> int:
        return (24 * 60) // self.bin_width_minutes

    def contains(self, b: int) -> bool:
        return self.start_bin <= b < self.end_bin

    def encode(self) -> str:
        return f"{self.start_bin}-{self.end_bin}"

    def key(self) -> tuple:
        return (
            self.start_bin,
            self.end_bin,
            self.day_type.value if self.day_type else "",
            self.bin_width_minutes,
        )

    @classmethod
    def parse(
        cls,
        text: str,
        day_type: DayType | None = None,
        bin_width_minutes: int = DEFAULT_BIN_WIDTH_MINUTES,
    ) -> "TimeWindow":
        try:
            start_s, end_s = text.split("-", 1)
            start, end = int(start_s), int(end_s)
        except ValueError as exc:
            raise ValueError(f"bad window {text!r}; expected 'start-end'") from exc
        return cls(start, end, day_type=day_type, bin_width_minutes=bin_width_minutes)

    @classmethod
    def whole_day(
        cls,
        day_type: DayType | None = None,
        bin_width_minutes: int = DEFAULT_BIN_WIDTH_MINUTES,
    ) -> "TimeWindow":
        return cls(0, (24 * 60) // bin_width_minutes, day_type, bin_width_minutes)


def bin_of(ts: datetime, bin_width_minutes: int = DEFAULT_BIN_WIDTH_MINUTES) -> int:
    """Time-of-day bin of a timestamp."""
    return (ts.hour * 60 + ts.minute) // bin_width_minutes


@dataclass(frozen=True, slots=True)
class ClusterPath:
    """One trajectory mapped to cluster ids, consecutive repeats collapsed.

    ``depart_bins[i]`` is the time-of-day bin in which the user left
    ``clusters[i]``; for i < len-1 that is the bin of the i → i+1 transition.
    """

    clusters: tuple[str, ...]
    depart_bins: tuple[int, ...]


def corpus_from_stays(
    stays: Iterable[StaySequence],
    assignment: Mapping[str, str],
    day_type: DayType | None = None,
    bin_width_minutes: int = DEFAULT_BIN_WIDTH_MINUTES,
) -> list[ClusterPath]:
    """Map stay sequences to cluster paths.

    Visits outside the assignment (unprojected or outside the study area) are
    skipped; consecutive visits in the same cluster collapse to one step that
    keeps the departure time of the last visit in the run.  Paths shorter than
    two clusters are dropped.
    """
    corpus: list[ClusterPath] = []
    for seq in stays:
        if day_type is not None and seq.day_type != day_type:
            continue
        clusters: list[str] = []
        bins: list[int] = []
        for visit in seq.visits:
            cid = assignment.get(visit.region_id) if visit.region_id else None
            if cid is None:
                continue
            b = bin_of(visit.departure, bin_width_minutes)
            if clusters and clusters[-1] == cid:
                bins[-1] = b  # stay put: departure moves to the later visit
            else:
                clusters.append(cid)
                bins.append(b)
        if len(clusters) >= 2:
            corpus.append(ClusterPath(tuple(clusters), tuple(bins)))
    return corpus


@dataclass(slots=True)
class TransitionGraph:
    """First-order cluster-to-cluster movement counts, per departure bin.

    Self-transitions (consecutive visits inside one cluster) are tallied
    separately; they are dwelling, not movement, and never enter transition
    probabilities.
    """

    bin_width_minutes: int = DEFAULT_BIN_WIDTH_MINUTES
    day_type: DayType | None = None
    vertices: dict[str, tuple[float, float]] = field(default_factory=dict)
    edges: dict[tuple[str, str, int], int] = field(default_factory=dict)
    self_weights: dict[tuple[str, int], int] = field(default_factory=dict)

    @property
    def bins_per_day(self) -> int:
        return (24 * 60) // self.bin_width_minutes

    def out_counts(self, source: str, window: TimeWindow | None = None) -> dict[str, int]:
        out: dict[str, int] = {}
        for (src, dst, b), n in self.edges.items():
            if src == source and (window is None or window.contains(b)):
                out[dst] = out.get(dst, 0) + n
        return dict(sorted(out.items()))

    def total_weight(self, window: TimeWindow | None = None) -> int:
        return sum(
            n for (_, _, b), n in self.edges.items() if window is None or window.contains(b)
        )


def build_transition_graph(
    stays: Iterable[StaySequence],
    assignment: Mapping[str, str],
    centroids: Mapping[str, tuple[float, float]] | None = None,
    day_type: DayType | None = None,
    bin_width_minutes: int = DEFAULT_BIN_WIDTH_MINUTES,
) -> TransitionGraph:
    """Count one-step transitions between clusters, keyed by departure bin."""
    graph = TransitionGraph(bin_width_minutes=bin_width_minutes, day_type=day_type)
    if centroids:
        graph.vertices = {cid: tuple(xy) for cid, xy in sorted(centroids.items())}
    for seq in stays:
        if day_type is not None and seq.day_type != day_type:
            continue
        mapped = [
            (assignment[v.region_id], bin_of(v.departure, bin_width_minutes))
            for v in seq.visits
            if v.region_id is not None and v.region_id in assignment
        ]
        for (src, b), (dst, _) in zip(mapped, mapped[1:]):
            if src == dst:
                key = (src, b)
                graph.self_weights[key] = graph.self_weights.get(key, 0) + 1
            else:
                ekey = (src, dst, b)
                graph.edges[ekey] = graph.edges.get(ekey, 0) + 1
    graph.edges = dict(sorted(graph.edges.items()))
    graph.self_weights = dict(sorted(graph.self_weights.items()))
    return graph


def first_order_prob(
    graph: TransitionGraph, source: str, window: TimeWindow | None = None
) -> dict[str, float]:
    """P(next | source) restricted to transitions departing inside the window.

    An isolated source (no outgoing transitions in the window) yields an
    empty dict rather than NaNs.
    """
    counts = graph.out_counts(source, window)
    total = sum(counts.values())
    if total == 0:
        return {}
    return {dst: n / total for dst, n in counts.items()}


def _iter_transitions(path: ClusterPath):
    cl, bins = path.clusters, path.depart_bins
    for i in range(len(cl) - 1):
        yield i, cl[i + 1], bins[i]


def conditional_distribution(
    corpus: Sequence[ClusterPath],
    context: Sequence[str],
    window: TimeWindow,
) -> tuple[dict[str, float], int]:
    """P(next | context) with the final transition departing inside the window.

    ``context`` lists clusters most-recent-first: ("B", "A") means the user
    was at A and then B.  Returns the distribution and the number of context
    occurrences it was estimated from.
    """
    ctx = tuple(context)
    k = len(ctx)
    counter: Counter[str] = Counter()
    for path in corpus:
        cl = path.clusters
        for i, nxt, b in _iter_transitions(path):
            if i - k + 1 < 0 or not window.contains(b):
                continue
            if tuple(reversed(cl[i - k + 1 : i + 1])) == ctx:
                counter[nxt] += 1
    total = sum(counter.values())
    if total == 0:
        return {}, 0
    return {n: c / total for n, c in sorted(counter.items())}, total


def kld(p: Mapping[str, float], q: Mapping[str, float], eps: float = _KLD_EPS) -> float:
    """Kullback-Leibler divergence D(p || q) in bits, with epsilon smoothing."""
    total = 0.0
    for key, pv in p.items():
        if pv <= 0:
            continue
        qv = q.get(key, 0.0)
        total += pv * math.log2(pv / max(qv, eps))
    return total


@dataclass(frozen=True, slots=True)
class HonRule:
    """One accepted rule: P(next | context) inside a window.

    ``context`` is most-recent-first, so ``path`` (oldest → next) is the
    chain the rule describes.  ``support`` counts context occurrences in the
    window and is shared by all sibling rules of the same context, whose
    probabilities therefore sum to 1.
    """

    context: tuple[str, ...]
    next: str
    probability: float
    support: int
    order: int
    window: TimeWindow

    @property
    def path(self) -> tuple[str, ...]:
        return tuple(reversed(self.context)) + (self.next,)


def _count_contexts(
    corpus: Sequence[ClusterPath], window: TimeWindow, max_order: int
) -> dict[tuple[str, ...], Counter]:
    counts: dict[tuple[str, ...], Counter] = {}
    for path in corpus:
        cl = path.clusters
        for i, nxt, b in _iter_transitions(path):
            if not window.contains(b):
                continue
            for k in range(1, max_order + 1):
                if i - k + 1 < 0:
                    break
                ctx = tuple(reversed(cl[i - k + 1 : i + 1]))
                counts.setdefault(ctx, Counter())[nxt] += 1
    return counts


def grow_rules(
    corpus: Sequence[ClusterPath],
    window: TimeWindow,
    min_support: int = DEFAULT_MIN_SUPPORT,
    max_order: int = DEFAULT_MAX_ORDER,
    kld_scale: float = 1.0,
) -> list[HonRule]:
    """Grow variable-order rules bottom-up from first-order contexts.

    Every source cluster yields its order-1 rules unconditionally.  A context
    extended by one older step is accepted only when its occurrence count
    reaches ``min_support`` and the KL divergence (bits) of its next-cluster
    distribution from its parent's exceeds ``kld_scale * k / log2(1 + n)``,
    where k is the extended order and n its support.  Extension recurses only
    from accepted contexts, up to ``max_order``.
    """
    ctx_counts = _count_contexts(corpus, window, max_order)
    children: dict[tuple[str, ...], list[tuple[str, ...]]] = {}
    for ctx in ctx_counts:
        if len(ctx) > 1:
            children.setdefault(ctx[:-1], []).append(ctx)
    for lst in children.values():
        lst.sort()

    def dist_of(ctx: tuple[str, ...]) -> tuple[dict[str, float], int]:
        counter = ctx_counts[ctx]
        total = sum(counter.values())
        return {n: c / total for n, c in sorted(counter.items())}, total

    rules: list[HonRule] = []

    def emit(ctx: tuple[str, ...]) -> dict[str, float]:
        dist, total = dist_of(ctx)
        for nxt, p in dist.items():
            rules.append(
                HonRule(
                    context=ctx,
                    next=nxt,
                    probability=p,
                    support=total,
                    order=len(ctx),
                    window=window,
                )
            )
        return dist

    roots = sorted(c for c in ctx_counts if len(c) == 1)
    queue: deque[tuple[tuple[str, ...], dict[str, float]]] = deque()
    for root in roots:
        queue.append((root, emit(root)))

    while queue:
        parent, parent_dist = queue.popleft()
        if len(parent) >= max_order:
            continue
        for ext in children.get(parent, ()):
            ext_dist, ext_support = dist_of(ext)
            if ext_support < min_support:
                continue
            threshold = kld_scale * len(ext) / math.log2(1 + ext_support)
            divergence = kld(ext_dist, parent_dist)
            if divergence > threshold:
                queue.append((ext, emit(ext)))

    rules.sort(key=lambda r: (r.order, r.context, r.next))
    return rules


def count_path_traversals(
    corpus: Sequence[ClusterPath],
    path: Sequence[str],
    window: TimeWindow,
) -> tuple[int, list[np.ndarray]]:
    """Count full traversals of a cluster chain; also tally per-edge bins.

    A traversal is a run of consecutive steps matching ``path`` whose final
    transition departs inside the window; earlier edges may depart any time,
    and their departure bins fill the per-edge histograms (one histogram per
    edge, each summing to the flow).
    """
    target = tuple(path)
    length = len(target)
    bins_per_day = window.bins_per_day
    hists = [np.zeros(bins_per_day, dtype=int) for _ in range(length - 1)]
    flow = 0
    for cp in corpus:
        cl, bins = cp.clusters, cp.depart_bins
        for j in range(len(cl) - length + 1):
            if tuple(cl[j : j + length]) == target and window.contains(bins[j + length - 2]):
                flow += 1
                for e in range(length - 1):
                    hists[e][bins[j + e]] += 1
    return flow, hists


@dataclass(frozen=True, slots=True)
class Pattern:
    """A movement pattern: a short cluster chain with its observed flow.

    ``mode`` is "annular" when the chain revisits a cluster (a loop back),
    otherwise "linear".  ``entropy_rate`` is the normalized branching entropy
    of the rule the pattern came from: 0 when the context is deterministic,
    1 when all continuations are equally likely.
    """

    path: tuple[str, ...]
    order: int
    flow: int
    window: TimeWindow
    entropy_rate: float
    mode: str
    edge_bins: tuple[tuple[int, ...], ...]


def pattern_entropy_rate(rule: HonRule, rules: Sequence[HonRule]) -> float:
    """Normalized entropy (base = branching factor) of the rule's siblings."""
    probs = [r.probability for r in rules if r.context == rule.context and r.window == rule.window]
    m = len(probs)
    if m <= 1:
        return 0.0
    h = -sum(p * math.log2(p) for p in probs if p > 0)
    return h / math.log2(m)


def _pattern_from_rule(
    rule: HonRule,
    rules: Sequence[HonRule],
    corpus: Sequence[ClusterPath],
    window: TimeWindow,
) -> Pattern:
    path = rule.path
    flow, hists = count_path_traversals(corpus, path, window)
    return Pattern(
        path=path,
        order=rule.order,
        flow=flow,
        window=window,
        entropy_rate=pattern_entropy_rate(rule, rules),
        mode="annular" if len(set(path)) < len(path) else "linear",
        edge_bins=tuple(tuple(int(x) for x in h) for h in hists),
    )


def assemble_global_patterns(
    rules: Sequence[HonRule],
    corpus: Sequence[ClusterPath],
    window: TimeWindow,
    top_n: int | None = None,
    min_flow: int = 1,
    max_path_len: int = MAX_PATTERN_PATH_LEN,
) -> list[Pattern]:
    """Turn accepted higher-order rules into flow-ranked patterns.

    Only rules of order ≥ 2 become patterns (first-order movement is the
    plain transition graph).  Patterns sort by descending flow, ties by path,
    and ``top_n`` truncates the list (0 → empty).
    """
    patterns: list[Pattern] = []
    for rule in rules:
        if rule.order < 2 or len(rule.path) > max_path_len:
            continue
        pat = _pattern_from_rule(rule, rules, corpus, window)
        if pat.flow >= min_flow:
            patterns.append(pat)
    patterns.sort(key=lambda p: (-p.flow, p.path))
    if top_n is not None:
        patterns = patterns[: max(top_n, 0)]
    return patterns


def merge_selection(
    corpus: Sequence[ClusterPath], selection: Iterable[str], merged_id: str
) -> list[ClusterPath]:
    """Relabel all selected clusters as one super-cluster and re-collapse."""
    sel = set(selection)
    out: list[ClusterPath] = []
    for cp in corpus:
        clusters: list[str] = []
        bins: list[int] = []
        for cid, b in zip(cp.clusters, cp.depart_bins):
            mapped = merged_id if cid in sel else cid
            if clusters and clusters[-1] == mapped:
                bins[-1] = b
            else:
                clusters.append(mapped)
                bins.append(b)
        if len(clusters) >= 2:
            out.append(ClusterPath(tuple(clusters), tuple(bins)))
    return out


def local_patterns(
    corpus: Sequence[ClusterPath],
    selection: Sequence[str],
    window: TimeWindow,
    min_flow: int = 1,
    min_support: int = DEFAULT_MIN_SUPPORT,
    max_order: int = DEFAULT_MAX_ORDER,
    rules: Sequence[HonRule] | None = None,
) -> list[Pattern]:
    """Patterns passing through a selection of clusters.

    A single selected cluster filters the global patterns to those whose path
    touches it.  A multi-cluster selection is first merged into one
    super-cluster (id "sel:a+b+..."), rules are regrown on the relabeled
    corpus, and patterns through the super-cluster are returned.
    """
    if not selection:
        return []
    if len(selection) == 1:
        base_rules = (
            rules
            if rules is not None
            else grow_rules(corpus, window, min_support=min_support, max_order=max_order)
        )
        pats = assemble_global_patterns(base_rules, corpus, window, min_flow=min_flow)
        target = selection[0]
        return [p for p in pats if target in p.path]

    merged_id = "sel:" + "+".join(sorted(selection))
    merged = merge_selection(corpus, selection, merged_id)
    merged_rules = grow_rules(merged, window, min_support=min_support, max_order=max_order)
    pats = assemble_global_patterns(merged_rules, merged, window, min_flow=min_flow)
    return [p for p in pats if merged_id in p.path]


def edge_flow_histogram(pattern: Pattern, edge_index: int) -> tuple[int, ...]:
    """Departure-bin histogram of one edge of a pattern (sums to its flow)."""
    return pattern.edge_bins[edge_index]


def flow_by_order_stats(
    corpus: Sequence[ClusterPath],
    windows: Sequence[TimeWindow],
    orders: Sequence[int] = (2, 3, 4, 5),
    min_support: int = DEFAULT_MIN_SUPPORT,
    kld_scale: float = 1.0,
) -> list[dict]:
    """Mean full-path flow of accepted patterns, per window and order.

    Emits one row per (window, order) with the pattern count and mean flow
    (None when no pattern of that order was accepted).  An empty corpus or an
    empty order list yields an empty table.
    """
    if not corpus:
        return []
    rows: list[dict] = []
    wanted = sorted(set(int(o) for o in orders))
    if not wanted:
        return []
    for window in windows:
        max_order = max(wanted)
        rules = grow_rules(corpus, window, min_support=min_support, max_order=max_order,
                           kld_scale=kld_scale)
        pats = assemble_global_patterns(
            rules, corpus, window, min_flow=0, max_path_len=max_order + 1
        )
        for order in wanted:
            flows = [p.flow for p in pats if p.order == order]
            rows.append(
                {
                    "window": window.encode(),
                    "day_type": window.day_type.value if window.day_type else "all",
                    "order": order,
                    "patterns": len(flows),
                    "mean_flow": float(np.mean(flows)) if flows else None,
                }
            )
    return rows
