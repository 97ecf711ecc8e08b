"""Generate a fixture, build a snapshot, and tour the HTTP API in-process.

Run: python demos/04_full_pipeline.py
"""

import tempfile

from starlette.testclient import TestClient

from honflow.cli import main
from honflow.service import create_app

with tempfile.TemporaryDirectory() as tmp:
    fx = f"{tmp}/fixture"
    assert main(["gen-fixture", "--out", fx, "--seed", "7"]) == 0
    assert main(["ingest", "--config", f"{fx}/config.json"]) == 0
    snap = f"{fx}/snapshot"
    assert main(["aggregate", "--data", snap, "--day-type", "weekday"]) == 0
    assert main(["extract", "--data", snap, "--day-type", "weekday",
                 "--windows", "7-10,18-20"]) == 0

    client = TestClient(create_app(snap))
    info = client.get("/api/v1/datasets").json()["datasets"][0]
    print(f"\nsnapshot: {info['regions']} regions, {info['sequences']} sequences, "
          f"{info['visits']} visits, levels={info['levels']}")

    params = {"window": "7-10", "day_type": "weekday", "level": 1}
    regions = client.get("/api/v1/regions", params=params).json()
    print(f"morning window: {len(regions['features'])} level-1 clusters")

    tl = client.get("/api/v1/timeline", params={"day_type": "weekday"}).json()
    busiest = max(tl["bins"], key=lambda b: b["total"])
    print(f"busiest hour: {busiest['bin']:02d}:00 with {busiest['total']} departures")

    top = client.get("/api/v1/patterns/global", params={**params, "top_n": 3}).json()
    print("\ntop morning patterns:")
    for p in top["patterns"]:
        print(f"  {' -> '.join(p['path'])}  flow={p['flow']}  mode={p['mode']}")

    # drill into the hottest pattern's first stop
    first = top["patterns"][0]["path"][0]
    local = client.post(
        "/api/v1/patterns/local",
        json={"cluster_ids": [first], "window": "7-10", "day_type": "weekday"},
    ).json()
    print(f"\npatterns through {first}: "
          f"{[(' -> '.join(p['path']), p['flow']) for p in local['patterns']]}")

    stats = client.get(f"/api/v1/regions/{first}/stats",
                       params={"window": "7-10", "day_type": "weekday"}).json()
    mix = ", ".join(f"{k} {v:.2f}" for k, v in sorted(
        stats["poi_share"].items(), key=lambda kv: -kv[1])[:3])
    print(f"{first} mix: {mix}")
