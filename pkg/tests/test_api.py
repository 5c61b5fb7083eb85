import math

import pytest
from fastapi.testclient import TestClient

from app.api import app


@pytest.fixture(scope="module")
def client() -> TestClient:
    return TestClient(app)


# ── Exponents ───────────────────────────────────────────────


def test_exponents_without_p(client):
    res = client.get("/exponents", params={"d": 3, "s": 0.5})
    assert res.status_code == 200
    body = res.json()
    assert body["p_F"] == pytest.approx(4 / 3)
    assert body["p_crit"] == pytest.approx(1.5)


def test_exponents_with_p(client):
    res = client.get("/exponents", params={"d": 3, "s": 0.5, "p": 2})
    assert res.status_code == 200
    body = res.json()
    assert body["p_c_s"] == pytest.approx(3.0)
    assert body["k"] == pytest.approx(1.5)
    assert body["q"] is not None


def test_exponents_bad_s(client):
    res = client.get("/exponents", params={"d": 1, "s": 1.5})
    assert res.status_code == 422


def test_fractional_constant(client):
    res = client.get("/fractional-constant", params={"d": 1, "s": 0.5})
    assert res.status_code == 200
    assert res.json()["value"] == pytest.approx(1 / math.pi)


# ── Operator ────────────────────────────────────────────────


def test_symbol(client):
    res = client.get("/symbol", params={"a": 1, "b": 2, "s": 0.5, "xi": [3, 4]})
    assert res.status_code == 200
    assert res.json()["value"] == pytest.approx(25 + 2 * 5)


def test_symbol_rejects_degenerate_operator(client):
    res = client.get("/symbol", params={"a": 0, "b": 0, "s": 0.5, "xi": [1]})
    assert res.status_code == 422
    assert "a + b must be positive" in res.text


# ── Growth functional ───────────────────────────────────────


def test_growth(client):
    res = client.get("/growth", params={"sigma": 2, "R": 5, "d": 1, "profile": "radius"})
    assert res.status_code == 200
    assert res.json()["value"] == pytest.approx(1.0, rel=1e-10)


def test_growth_unknown_profile(client):
    res = client.get("/growth", params={"sigma": 2, "R": 5, "d": 1, "profile": "cone"})
    assert res.status_code == 422
