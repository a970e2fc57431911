"""Shared fixtures: a throwaway copy of the shipped fixture set, stores in
various stages of population, and an API client with a frozen clock."""

import shutil
from datetime import datetime, timezone
from pathlib import Path

import pytest

from dpw.config import load_config
from dpw.ingestion import import_source, seed_master_data
from dpw.store import Store

REPO_FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

# Frozen "now": shortly after the newest fixture RfQ, so bot windows and
# feed recency behave the same on every run.
FROZEN_NOW = datetime(2025, 7, 21, 12, 0, 0, tzinfo=timezone.utc)


def frozen_clock() -> datetime:
    return FROZEN_NOW


@pytest.fixture()
def fixtures_dir(tmp_path):
    target = tmp_path / "fixtures"
    shutil.copytree(REPO_FIXTURES, target)
    return target


@pytest.fixture()
def config(fixtures_dir):
    return load_config(fixtures_dir / "dpw.json")


@pytest.fixture()
def seeded_store(config, fixtures_dir):
    store = Store(source_priority=config.source_priority)
    seed_master_data(store, fixtures_dir)
    return store


@pytest.fixture()
def full_store(config, fixtures_dir, seeded_store):
    for source in config.sources:
        import_source(seeded_store, source, base_dir=config.base_dir, clock=frozen_clock)
    return seeded_store


@pytest.fixture()
def client(config, full_store):
    from fastapi.testclient import TestClient

    from dpw.api import create_app

    app = create_app(store=full_store, config=config, clock=frozen_clock)
    with TestClient(app) as test_client:
        yield test_client


@pytest.fixture()
def auth_header(client):
    def issue(user_id="u-anna"):
        response = client.post("/api/auth/token", json={"userId": user_id})
        assert response.status_code == 200, response.text
        return {"Authorization": f"Bearer {response.json()['token']}"}

    return issue
