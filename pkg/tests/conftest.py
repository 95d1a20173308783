"""Shared fixtures: domain objects, a fresh store, and a seeded API client."""

from __future__ import annotations

from datetime import date, datetime, timezone
from types import SimpleNamespace

import pytest
from fastapi.testclient import TestClient

from hmms import (
    RecordsStore,
    Role,
    load_default_catalog,
    load_default_ruleset,
    load_default_schedule,
    validate_value,
)
from hmms.api import create_app
from hmms.config import ServiceConfig

FIXED_NOW = datetime(2024, 6, 1, 9, 0, tzinfo=timezone.utc)


@pytest.fixture(scope="session")
def catalog():
    return load_default_catalog()


@pytest.fixture(scope="session")
def schedule():
    return load_default_schedule()


@pytest.fixture(scope="session")
def ruleset():
    return load_default_ruleset()


@pytest.fixture
def store(catalog):
    s = RecordsStore(":memory:", catalog)
    yield s
    s.close()


@pytest.fixture
def make_value(catalog):
    def _make(key, raw, camp_year=None, at=FIXED_NOW, by="tester"):
        return validate_value(catalog[key], raw, recorded_at=at, camp_year=camp_year, recorded_by=by)

    return _make


@pytest.fixture
def register(store, make_value):
    """Register a student with the minimum identity set; returns the record."""

    def _register(screening_id="S-0001", rfid_token="CARD-0001",
                  name="Test Student", dob="2015-03-10", **extra_one_time):
        values = {
            "screening_id": make_value("screening_id", screening_id),
            "student_name": make_value("student_name", name),
            "date_of_birth": make_value("date_of_birth", dob),
        }
        for key, raw in extra_one_time.items():
            values[key] = make_value(key, raw)
        return store.register_student(values, rfid_token, recorded_by="tester")

    return _register


PASSWORDS = {
    "admin": "pw-admin-1",
    "nurse": "pw-nurse-1",
    "doctor": "pw-doctor-1",
    "student": "pw-student-1",
}


@pytest.fixture
def api(tmp_path):
    """App + client + one login token per role; a student record backs the student login."""
    config = ServiceConfig(database_path=str(tmp_path / "api.db"))
    app = create_app(config)
    store = app.state.store
    catalog = app.state.catalog

    now = datetime.now(timezone.utc)
    values = {
        key: validate_value(catalog[key], raw, recorded_at=now, recorded_by="seed")
        for key, raw in [
            ("screening_id", "S-SELF"),
            ("student_name", "Self Student"),
            ("date_of_birth", "2014-09-01"),
        ]
    }
    store.register_student(values, "CARD-SELF", recorded_by="seed")

    store.create_principal("admin", "The Admin", Role.ADMIN, PASSWORDS["admin"])
    store.create_principal("nurse", "The Nurse", Role.NURSE, PASSWORDS["nurse"])
    store.create_principal("doctor", "The Doctor", Role.DOCTOR, PASSWORDS["doctor"])
    store.create_principal("student", "The Student", Role.STUDENT, PASSWORDS["student"],
                           screening_id="S-SELF")

    client = TestClient(app)
    tokens = {}
    for role in ("admin", "nurse", "doctor", "student"):
        response = client.post("/api/v1/login", json={"username": role, "password": PASSWORDS[role]})
        assert response.status_code == 200, response.text
        tokens[role] = response.json()["token"]

    def headers(role):
        return {"Authorization": f"Bearer {tokens[role]}"}

    yield SimpleNamespace(
        app=app, client=client, store=store, catalog=catalog,
        schedule=app.state.schedule, tokens=tokens, headers=headers,
    )
    client.close()


def seed_full_student(api_env, screening_id="S-0100", rfid_token="CARD-0100"):
    """A student with two camp years of measurements and one dose, via the API."""
    nurse = api_env.headers("nurse")
    response = api_env.client.post("/api/v1/students", headers=nurse, json={
        "rfid_token": rfid_token,
        "values": {
            "screening_id": screening_id,
            "student_name": "Seeded Student",
            "date_of_birth": "2013-05-20",
        },
    })
    assert response.status_code == 201, response.text
    for camp_year, height, weight in [(2023, 118.0, 21.5), (2024, 123.5, 24.0)]:
        for key, value in (("height", height), ("weight", weight)):
            response = api_env.client.post(
                f"/api/v1/students/{screening_id}/values", headers=nurse,
                json={"key": key, "value": value, "camp_year": camp_year},
            )
            assert response.status_code == 201, response.text
    response = api_env.client.post(f"/api/v1/students/{screening_id}/doses", headers=nurse,
                                   json={"vaccine_code": "BCG", "dose_number": 1,
                                         "given_on": "2013-05-27"})
    assert response.status_code == 201, response.text
    return screening_id
