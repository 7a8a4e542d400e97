from unittest.mock import patch

from configuration.loader import save_model, save_scenario
from conftest import read_config
from models.simulation import RunStatus


def test_health_check(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_validate_reference_model(client, full_config_text):
    response = client.post("/api/v1/validate", json={"model": full_config_text})
    assert response.status_code == 200
    assert response.json()["valid"] is True


def test_validate_reports_parse_location(client):
    response = client.post("/api/v1/validate", json={"model": "[fluid]\nrho = 994\ncp = 4178\nviscosity = 1\n"})
    assert response.status_code == 400
    detail = response.json()["detail"]
    assert detail["line"] == 4
    assert detail["section"] == "fluid"
    assert detail["field"] == "viscosity"


def test_scale_returns_solution_and_lab_model(client, full_config_text):
    response = client.post("/api/v1/scale", json={
        "full": full_config_text,
        "lab_constraints": read_config("lab_constraints.ini"),
    })
    assert response.status_code == 200
    data = response.json()
    assert data["feasible"] is True
    assert abs(data["solution"]["temperature_ratio"]["k_T"] - 0.45) < 1e-12
    assert "[thermal_mass ThM2]" in data["lab_model"]


def test_unknown_run_is_404(client):
    response = client.get("/api/v1/runs/0000")
    assert response.status_code == 404


@patch("app.runner.run_experiments")
def test_submit_run_is_idempotent(mock_run, client, small_model, small_scenario):
    payload = {"model": save_model(small_model), "scenario": save_scenario(small_scenario)}
    first = client.post("/api/v1/runs", json=payload)
    second = client.post("/api/v1/runs", json=payload)

    assert first.status_code == 200
    assert first.json()["status"] == "queued"
    assert first.json()["run_id"] == second.json()["run_id"]
    assert mock_run.call_count == 2

    status = client.get(f"/api/v1/runs/{first.json()['run_id']}")
    assert status.status_code == 200
    assert status.json()["status"] == RunStatus.QUEUED.value


def test_invalid_network_is_not_queued(client, small_model, small_scenario):
    segments = [s for s in small_model.segments if s.id != "B"]
    broken = small_model.model_copy(update={"segments": segments})
    response = client.post("/api/v1/runs", json={"model": save_model(broken), "scenario": save_scenario(small_scenario)})
    assert response.status_code == 422
