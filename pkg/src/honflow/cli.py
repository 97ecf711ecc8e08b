"""Batch command-line driver: ingest, aggregate, extract, sweeps, serve.

Every command is deterministic for identical inputs and configuration: JSON
is written with sorted keys and stable formatting, table floats use fixed
formatting, and nothing records wall-clock time.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import socket
import sys
import threading
from pathlib import Path

import numpy as np
import pandas as pd

from . import synth
from .aggregate import AggregationConfig, bfs_aggregate
from .config import ConfigError, RunConfig
from .geo import GeoError, SpatialIndex, derive_adjacency, load_regions, project_points
from .hon import TimeWindow, assemble_global_patterns, corpus_from_stays, flow_by_order_stats, grow_rules
from .ingest import (
    CategoryTaxonomy,
    DayType,
    GreatCircleProvider,
    HolidayCalendar,
    IngestError,
    build_trajectories,
    classify_day,
    estimate_stays,
    parse_checkins,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USER = 1
EXIT_INTERNAL = 2


class _UserError(Exception):
    """Anything the user can fix: bad flags, bad config, missing files."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems are user errors, not code 2
        raise _UserError(message)


def _write_json(path: Path, payload) -> None:
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _write_table(df: pd.DataFrame, out: str | None) -> None:
    text = df.to_csv(index=False, float_format="%.6f", na_rep="")
    if out:
        Path(out).write_text(text, encoding="utf-8")
        print(f"wrote {out} ({len(df)} rows)")
    else:
        sys.stdout.write(text)


def _load_run_config(args) -> RunConfig:
    if getattr(args, "config", None):
        cfg = RunConfig.from_file(args.config)
    else:
        cfg = RunConfig()
    overrides = {}
    for key in (
        "checkins", "regions", "taxonomy", "holidays", "out_dir",
        "split_gap_seconds", "tail_stay_seconds", "speed_kmh",
        "beta_min", "beta_max", "levels", "bin_width_minutes",
        "min_support", "max_order", "weighting", "port",
    ):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if getattr(args, "alphas", None):
        overrides["alphas"] = tuple(float(a) for a in args.alphas.split(","))
    return cfg.with_overrides(**overrides)


def _snapshot(data_dir: str):
    from .service import Snapshot  # deferred: keeps fast commands import-light

    return Snapshot(data_dir)


# --------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    cfg = _load_run_config(args)
    if not cfg.checkins or not cfg.regions:
        raise _UserError("ingest needs --checkins and --regions (or a config providing them)")

    taxonomy = (
        CategoryTaxonomy.from_file(cfg.taxonomy) if cfg.taxonomy else CategoryTaxonomy.default()
    )
    calendar = HolidayCalendar.from_file(cfg.holidays) if cfg.holidays else HolidayCalendar()

    report = parse_checkins(cfg.checkins, taxonomy)
    trajectories = build_trajectories(report.records, cfg.split_gap_seconds)
    provider = GreatCircleProvider(cfg.speed_kmh)
    stays = []
    for traj in trajectories:
        seq = estimate_stays(traj, provider, cfg.tail_stay_seconds)
        seq.day_type = classify_day(seq.day, calendar)
        stays.append(seq)

    regions = derive_adjacency(load_regions(cfg.regions), cfg.adjacency_epsilon_m)
    index = SpatialIndex.build(regions)
    all_visits = [v for seq in stays for v in seq.visits]
    assignment = project_points(index, all_visits)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "visits.jsonl", "w", encoding="utf-8") as fh:
        for seq in sorted(stays, key=lambda s: (s.user_id, s.day.isoformat())):
            row = {
                "user_id": seq.user_id,
                "day": seq.day.isoformat(),
                "day_type": seq.day_type.value if seq.day_type else None,
                "visits": [
                    {
                        "poi_id": v.poi_id,
                        "category": v.category,
                        "region_id": v.region_id,
                        "lat": v.lat,
                        "lon": v.lon,
                        "arrival": v.arrival.isoformat(),
                        "stay_seconds": v.stay_seconds,
                        "travel_seconds": v.travel_seconds,
                        "flagged": v.flagged,
                    }
                    for v in seq.visits
                ],
            }
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")

    with open(cfg.regions, "r", encoding="utf-8") as fh:
        region_data = json.load(fh)
    (out / "regions.geojson").write_text(
        json.dumps(region_data, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )
    _write_json(out / "taxonomy.json", list(taxonomy.categories))
    persisted = cfg.with_overrides(out_dir=str(out))
    _write_json(out / "config.json", persisted.to_dict())

    ingest_report = {
        "total_rows": report.total_rows,
        "accepted_records": len(report.records),
        "rejected_rows": len(report.rejected),
        "reject_reasons": report.reject_counts,
        "trajectories": len(trajectories),
        "sequences": len(stays),
        "visits": len(all_visits),
        "unassigned_visits": len(assignment.unassigned),
        "regions": len(regions),
        "day_types": sorted({s.day_type.value for s in stays if s.day_type}),
    }
    _write_json(out / "ingest_report.json", ingest_report)

    print(f"rows: {report.total_rows}  accepted: {len(report.records)}  "
          f"rejected: {len(report.rejected)}")
    print(f"sequences: {len(stays)}  visits: {len(all_visits)}  "
          f"unassigned: {len(assignment.unassigned)}")
    print(f"snapshot written to {out}")
    return EXIT_OK


def cmd_aggregate(args) -> int:
    snap = _snapshot(args.data)
    day_types = (
        [None if args.day_type in (None, "all") else DayType(args.day_type)]
        if args.day_type
        else [None] + [DayType(d) for d in snap.day_types_present()]
    )
    for dt in day_types:
        window = (
            TimeWindow.parse(args.window, day_type=dt, bin_width_minutes=snap.bin_width)
            if args.window
            else TimeWindow.whole_day(dt, snap.bin_width)
        )
        hierarchy = snap.hierarchy(window)
        label = dt.value if dt else "all"
        name = f"hierarchy_{label}.json" if not args.window else f"hierarchy_{label}_{window.encode()}.json"
        _write_json(Path(args.data) / name, hierarchy.to_dict(snap.taxonomy))
        counts = ", ".join(
            f"L{lvl.level}:{len(lvl.clusters)}" for lvl in hierarchy.levels
        )
        print(f"{label}: {counts} -> {name}")
    return EXIT_OK


def cmd_extract(args) -> int:
    snap = _snapshot(args.data)
    cfg = snap.run_config
    windows = args.windows.split(",") if args.windows else list(cfg.extract_windows)
    day_types = (
        [None if args.day_type == "all" else DayType(args.day_type)]
        if args.day_type
        else [None] + [DayType(d) for d in snap.day_types_present()]
    )
    level = args.level
    for dt in day_types:
        label = dt.value if dt else "all"
        for wtext in windows:
            win = TimeWindow.parse(wtext, day_type=dt, bin_width_minutes=snap.bin_width)
            corpus = snap.corpus(TimeWindow.whole_day(dt, snap.bin_width), level)
            rules = grow_rules(
                corpus, win, min_support=cfg.min_support, max_order=cfg.max_order,
                kld_scale=cfg.kld_threshold_scale,
            )
            patterns = assemble_global_patterns(rules, corpus, win, top_n=args.top_n)
            payload = {
                "day_type": label,
                "window": win.encode(),
                "level": level,
                "rules": [
                    {
                        "context": list(r.context),
                        "next": r.next,
                        "probability": round(r.probability, 12),
                        "support": r.support,
                        "order": r.order,
                        "window": r.window.encode(),
                    }
                    for r in rules
                ],
                "patterns": [
                    {
                        "path": list(p.path),
                        "flow": p.flow,
                        "window": p.window.encode(),
                        "entropy_rate": round(p.entropy_rate, 12),
                        "mode": p.mode,
                        "order": p.order,
                        "edge_bins": [list(h) for h in p.edge_bins],
                    }
                    for p in patterns
                ],
            }
            name = f"patterns_{label}_{win.encode()}_L{level}.json"
            _write_json(Path(args.data) / name, payload)
            print(f"{label} {win.encode()}: {len(rules)} rules, "
                  f"{len(patterns)} patterns -> {name}")
    return EXIT_OK


def _all_visit_counts(snap) -> dict[str, np.ndarray]:
    counts: dict[str, np.ndarray] = {}
    for seq in snap.stays:
        for v in seq.visits:
            if v.region_id is None:
                continue
            vec = counts.get(v.region_id)
            if vec is None:
                vec = np.zeros(snap.taxonomy.size, dtype=float)
                counts[v.region_id] = vec
            vec[snap.taxonomy.index_of(v.category)] += 1.0
    return counts


def cmd_sweep_params(args) -> int:
    snap = _snapshot(args.data)
    alphas = [float(a) for a in args.alphas.split(",")]
    betas = []
    for text in args.betas.split(","):
        lo, hi = text.split("-", 1)
        betas.append((int(lo), int(hi)))
    counts = _all_visit_counts(snap)

    rows = []
    for alpha in alphas:
        for beta_min, beta_max in betas:
            config = AggregationConfig(
                alphas=(alpha,), beta_min=beta_min, beta_max=beta_max, levels=1
            )
            level = bfs_aggregate(snap.regions, counts, config)
            sizes = np.array([len(c.members) for c in level.clusters.values()], dtype=float)
            rows.append(
                {
                    "alpha": alpha,
                    "beta": f"{beta_min}-{beta_max}",
                    "clusters": len(level.clusters),
                    "pre_sweep_clusters": level.pre_sweep_count,
                    "mean_size": float(sizes.mean()) if sizes.size else 0.0,
                    "size_variance": float(sizes.var()) if sizes.size else 0.0,
                }
            )
    _write_table(pd.DataFrame(rows), args.out)
    return EXIT_OK


def cmd_sweep_order(args) -> int:
    snap = _snapshot(args.data)
    dt = None if args.day_type in (None, "all") else DayType(args.day_type)
    corpus = snap.corpus(TimeWindow.whole_day(dt, snap.bin_width), args.level)
    windows = [
        TimeWindow.parse(w, day_type=dt, bin_width_minutes=snap.bin_width)
        for w in args.windows.split(",")
    ]
    orders = list(range(2, args.max_order + 1))
    rows = flow_by_order_stats(
        corpus, windows, orders=orders,
        min_support=snap.run_config.min_support,
        kld_scale=snap.run_config.kld_threshold_scale,
    )
    df = pd.DataFrame(rows, columns=["window", "day_type", "order", "patterns", "mean_flow"])
    _write_table(df, args.out)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import PORT_ENV, create_app

    try:
        app = create_app(args.data)
    except FileNotFoundError as exc:
        raise _UserError(str(exc))

    if args.port is not None:
        port = args.port
    elif os.environ.get(PORT_ENV):
        try:
            port = int(os.environ[PORT_ENV])
        except ValueError:
            raise _UserError(f"{PORT_ENV} must be an integer, got {os.environ[PORT_ENV]!r}")
    else:
        port = app.state.snapshot.run_config.port
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, port))
    except OSError as exc:
        raise _UserError(f"cannot bind {args.host}:{port}: {exc}")
    finally:
        probe.close()

    print(f"serving {app.state.snapshot.data_dir} on http://{args.host}:{port}")
    server = uvicorn.Server(
        uvicorn.Config(app, host=args.host, port=port, log_level="warning")
    )
    # Run the server off the main thread so uvicorn leaves signal handling
    # to us; a SIGTERM/SIGINT then means "stop serving", not a dirty exit.
    stop = threading.Event()
    for sig in (signal.SIGTERM, signal.SIGINT):
        signal.signal(sig, lambda *_: stop.set())
    worker = threading.Thread(target=server.run, daemon=True)
    worker.start()
    while worker.is_alive() and not stop.is_set():
        worker.join(0.2)
    if stop.is_set():
        server.should_exit = True
        worker.join(10)
    return EXIT_OK


def cmd_gen_fixture(args) -> int:
    summary = synth.generate_fixture(args.out, seed=args.seed, scale=args.scale)
    print(f"regions: {summary.regions}  pois: {summary.pois}")
    print(f"sequences: {summary.sequences}  records: {summary.records}")
    print(f"fixture written to {summary.out_dir} (config: {summary.config})")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument wiring


def _build_parser() -> _Parser:
    parser = _Parser(prog="honflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse check-ins into a snapshot directory")
    p.add_argument("--config", help="JSON run config; flags override it")
    p.add_argument("--checkins")
    p.add_argument("--regions")
    p.add_argument("--taxonomy")
    p.add_argument("--holidays")
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--split-gap-seconds", dest="split_gap_seconds", type=float)
    p.add_argument("--tail-stay-seconds", dest="tail_stay_seconds", type=float)
    p.add_argument("--speed-kmh", dest="speed_kmh", type=float)
    p.add_argument("--alphas", help="comma-separated per-level alpha schedule")
    p.add_argument("--beta-min", dest="beta_min", type=int)
    p.add_argument("--beta-max", dest="beta_max", type=int)
    p.add_argument("--levels", type=int)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("aggregate", help="build and export cluster hierarchies")
    p.add_argument("--data", required=True, help="snapshot directory from ingest")
    p.add_argument("--day-type", dest="day_type", choices=["all", "weekday", "weekend", "holiday"])
    p.add_argument("--window", help="bin window start-end; default whole day")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("extract", help="export rules and patterns per window")
    p.add_argument("--data", required=True)
    p.add_argument("--windows", help="comma-separated bin windows, e.g. 7-10,18-20")
    p.add_argument("--day-type", dest="day_type", choices=["all", "weekday", "weekend", "holiday"])
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--top-n", dest="top_n", type=int)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("sweep-params", help="cluster counts across an alpha/beta grid")
    p.add_argument("--data", required=True)
    p.add_argument("--alphas", default="1.9,2.2,2.5")
    p.add_argument("--betas", default="3-5,3-7,3-9,5-9")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_params)

    p = sub.add_parser("sweep-order", help="mean pattern flow by rule order")
    p.add_argument("--data", required=True)
    p.add_argument("--windows", default="7-10,12-14,18-20")
    p.add_argument("--max-order", dest="max_order", type=int, default=5)
    p.add_argument("--day-type", dest="day_type", choices=["all", "weekday", "weekend", "holiday"])
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_order)

    p = sub.add_parser("serve", help="serve a snapshot over HTTP")
    p.add_argument("--data", help="snapshot directory; defaults to $HONFLOW_DATA")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, help="listen port; defaults to $HONFLOW_PORT, then the snapshot config")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("gen-fixture", help="generate a synthetic planted-pattern dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--scale", type=float, default=1.0)
    p.set_defaults(func=cmd_gen_fixture)

    return parser


def main(argv: list[str] | None = None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except (ConfigError, IngestError, GeoError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except KeyboardInterrupt:
        return EXIT_USER
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except Exception:
        logger.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
