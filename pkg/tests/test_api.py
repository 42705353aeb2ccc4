import json

import pytest
from fastapi.testclient import TestClient

from app import main
from app.main import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_root(client):
    assert client.get("/").status_code == 200


def test_groups(client):
    response = client.get("/api/groups")
    assert response.status_code == 200
    groups = {g["name"]: g for g in response.json()}
    assert set(groups) == {"affine", "e11", "heisenberg"}
    assert groups["affine"]["domain"] == "x1 > 0"


def test_verify_tables(client):
    body = client.get("/api/verify-tables").json()
    differences = body["report"]["table_differences"]
    assert [(d["entry"], d["component"]) for d in differences] == [("R(X1,X3)X1", "X3")]
    assert all(count == 0 for counts in body["identity_defects"].values() for count in counts.values())


def test_curve_curvature(client):
    response = client.post(
        "/api/curve-curvature",
        json={"group": "affine", "curve": {"name": "x2-line", "components": ["1", "t", "0"]}, "t": 0.5, "l_grid": [1.0, 4.0]},
    )
    assert response.status_code == 200
    body = response.json()
    assert [row["curvature"] for row in body["rows"]] == pytest.approx([1.0, 1.0])
    assert body["limits"][0]["classification"] == "NonHorizontal"


def test_curve_curvature_uses_the_configured_l_grid(client):
    response = client.post(
        "/api/curve-curvature",
        json={"group": "affine", "curve": {"name": "x2-line", "components": ["1", "t", "0"]}, "t": 0.5},
    )
    assert response.status_code == 200
    rows = response.json()["rows"]
    assert [row["L"] for row in rows] == main.scenario_service.config.get_default_l_grid()


def test_curve_outside_the_domain_is_a_bad_request(client):
    response = client.post(
        "/api/curve-curvature",
        json={"group": "affine", "curve": {"components": ["t - 1", "t", "0"]}, "t": 0.0},
    )
    assert response.status_code == 400
    assert "x1 > 0" in response.json()["detail"]


def test_surface_curvature(client):
    response = client.post(
        "/api/surface-curvature",
        json={"group": "e11", "surface": {"name": "x1-plane", "u": "x1 - 1", "points": [[1.0, 0.2, 0.4]]}, "l_grid": [2.0]},
    )
    assert response.status_code == 200
    (row,) = response.json()["rows"]
    assert row["gaussian_reference"] == pytest.approx(-1.0, abs=1e-8)


def test_gauss_bonnet(client, scenario_path):
    with open(scenario_path("e11-limit-gb"), encoding="utf-8") as handle:
        scenario = json.load(handle)
    scenario["surfaces"] = scenario["surfaces"][:1]
    scenario["l_grid"] = [1.0]
    response = client.post("/api/gauss-bonnet", json=scenario)
    assert response.status_code == 200
    (row,) = response.json()["gb_residuals"]
    assert abs(row["scaled_residual"]) <= 1e-6
