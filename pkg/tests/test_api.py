import pytest
from fastapi.testclient import TestClient

from main import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as test_client:
        yield test_client


SYNTHETIC = {"synthetic": {"n": 40, "d": 2, "seed": 0}}


def test_root_and_health(client):
    assert client.get("/").json()["status"] == "operational"
    health = client.get("/health").json()
    assert health["status"] == "healthy"


def test_train_run(client):
    body = {"data": SYNTHETIC, "config": {"steps": 2, "num_probes": 3, "solver": {"kind": "cg"}}}
    response = client.post("/api/v1/runs/train", json=body)
    assert response.status_code == 200
    trace = response.json()
    assert len(trace["steps"]) == 2
    assert trace["solver"] == "cg"
    assert trace["test_rmse"] is not None


def test_exact_run(client):
    response = client.post("/api/v1/runs/exact", json={"data": SYNTHETIC, "config": {"steps": 2}})
    assert response.status_code == 200
    assert response.json()["method"] == "exact"


def test_bench(client):
    body = {"data": SYNTHETIC, "config": {"steps": 2, "num_probes": 2}, "solvers": ["cg"], "splits": 2}
    response = client.post("/api/v1/experiments/bench", json=body)
    assert response.status_code == 200
    result = response.json()
    assert len(result["configs"]) == 2
    assert result["speed_ups"][0]["solver"] == "cg"


def test_gridsearch(client):
    body = {"data": SYNTHETIC, "candidate_lrs": [0.5, 1.0], "budget_steps": 20, "num_probes": 2}
    response = client.post("/api/v1/experiments/gridsearch-lr", json=body)
    assert response.status_code == 200
    assert response.json()["chosen_lr"] in (0.5, 1.0)


def test_second_moment(client):
    response = client.post("/api/v1/bounds/second-moment", json={"n": 4, "s": 2, "trials": 500})
    assert response.status_code == 200
    assert response.json()["theoretical_value"] == pytest.approx(2.5)


def test_lambda_max(client):
    body = {"data": SYNTHETIC, "lengthscales": [0.5, 0.5], "signal": 1.0, "noise": 0.1, "param_index": 3}
    response = client.post("/api/v1/bounds/lambda-max", json=body)
    assert response.status_code == 200
    bound = response.json()
    assert bound["product_norm"] <= bound["bound"] * (1 + 1e-10)


def test_wrong_lengthscale_count_is_bad_request(client):
    body = {"data": SYNTHETIC, "lengthscales": [0.5], "signal": 1.0, "noise": 0.1}
    response = client.post("/api/v1/bounds/lambda-max", json=body)
    assert response.status_code == 400
    assert response.json()["success"] is False


def test_numerical_failure_maps_to_422(client):
    body = {
        "data": SYNTHETIC,
        "config": {"steps": 2, "num_probes": 2, "solver": {"kind": "sgd", "learning_rate": 1e7}},
    }
    response = client.post("/api/v1/runs/train", json=body)
    assert response.status_code == 422
    payload = response.json()
    assert payload["error"] == "Solver diverged"
    assert payload["context"]["step"] == "1"


def test_invalid_body_is_rejected(client):
    response = client.post("/api/v1/runs/train", json={"data": SYNTHETIC, "config": {"steps": 0}})
    assert response.status_code == 422
    assert response.json()["success"] is False


def test_non_utf8_csv_is_bad_request(client, tmp_path):
    path = tmp_path / "latin.csv"
    path.write_bytes(b"x,y\n1.0,2.0\n3.0,4.0\n\xff\xfe,5.0\n")
    response = client.post("/api/v1/runs/train", json={"data": {"path": str(path), "target_col": "y"}})
    assert response.status_code == 400
    payload = response.json()
    assert payload["error"] == "Data error"
    assert payload["context"]["line"] == "4"


def test_missing_csv_is_bad_request(client, tmp_path):
    body = {"data": {"path": str(tmp_path / "none.csv"), "target_col": "y"}}
    response = client.post("/api/v1/runs/train", json=body)
    assert response.status_code == 400
