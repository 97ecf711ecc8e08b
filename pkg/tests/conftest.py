"""Shared fixtures: one generated dataset and ingested snapshot per session.

The generator is deterministic for a fixed seed, so every test that reads
from `snapshot_dir` sees the same bytes.
"""

import pytest

from honflow.synth import generate_fixture


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fx")
    generate_fixture(out, seed=7)
    return out


@pytest.fixture(scope="session")
def snapshot_dir(fixture_dir):
    from honflow.cli import main

    rc = main(["ingest", "--config", str(fixture_dir / "config.json")])
    assert rc == 0
    return fixture_dir / "snapshot"


@pytest.fixture(scope="session")
def client(snapshot_dir):
    from fastapi.testclient import TestClient

    from honflow.service import create_app

    with TestClient(create_app(str(snapshot_dir))) as c:
        yield c


@pytest.fixture(scope="session")
def taxonomy():
    from honflow import CategoryTaxonomy

    return CategoryTaxonomy.default()
