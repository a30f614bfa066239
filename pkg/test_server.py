"""
Tests for the REST simulation service, driven in-process with TestClient.
"""

from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from orchestration import SimulationOrchestrator
from scenarios import ScenarioStore
from server import create_app

STORE = ScenarioStore(Path(__file__).with_name("scenarios"))

SUSSMAN_STEPS = [
    {"action": "unstack", "block": "C", "target": "A"},
    {"action": "put_down", "block": "C"},
    {"action": "pick_up", "block": "B"},
    {"action": "stack", "block": "B", "target": "C"},
    {"action": "pick_up", "block": "A"},
    {"action": "stack", "block": "A", "target": "B"},
]


@pytest.fixture
def client() -> TestClient:
    return TestClient(create_app(SimulationOrchestrator(STORE)))


@pytest.fixture
def started(client) -> TestClient:
    assert client.post("/simulation/start", json={"scenario_id": "cat1/s01"}).status_code == 200
    return client


def act(client: TestClient, step: dict):
    body = {k: v for k, v in step.items() if k != "action"}
    return client.post(f"/actions/{step['action']}", json=body)


def test_health(client):
    body = client.get("/").json()
    assert body["success"] and body["data"]["running"] is False


def test_scenario_catalog(client):
    data = client.get("/scenarios").json()["data"]
    assert data["count"] == 50
    assert data["scenarios"][0]["id"] == "cat1/s01"


def test_start_errors(client):
    missing = client.post("/simulation/start", json={"scenario_id": "cat9/s01"})
    assert missing.status_code == 404
    assert missing.json()["success"] is False
    assert missing.json()["error"]["code"] == "unknown_scenario"
    client.post("/simulation/start", json={"scenario_id": "cat1/s01"})
    busy = client.post("/simulation/start", json={"scenario_id": "cat1/s02"})
    assert busy.status_code == 409 and busy.json()["error"]["code"] == "already_running"
    assert client.post("/simulation/start", json={"scenario_id": "cat1/s02", "force": True}).status_code == 200


def test_queries_need_a_session(client):
    response = client.get("/status")
    assert response.status_code == 409
    assert response.json()["error"]["code"] == "no_active_session"


def test_inline_scenario_schema_error(client):
    response = client.post("/simulation/start", json={"scenario": {"constraint_set": "base", "positions": 3}})
    assert response.status_code == 400
    assert response.json()["error"]["pointer"] == "/blocks"


def test_plan_through_actions(started):
    for step in SUSSMAN_STEPS:
        response = act(started, step)
        assert response.status_code == 200
        assert response.json()["success"]
    data = response.json()["data"]
    assert data["goal_reached"]
    assert data["observation"]["positions"] == [[], [], ["C", "B", "A"]]
    status = started.get("/status").json()["data"]
    assert status["goal_reached"] and status["actions_executed"] == 6
    log = started.get("/log").json()["data"]["actions"]
    assert [entry["action"] for entry in log] == SUSSMAN_STEPS


def test_violation_is_an_answer_not_an_error(started):
    response = act(started, {"action": "pick_up", "block": "A"})
    assert response.status_code == 200
    body = response.json()
    assert body["success"] is False
    assert body["error"]["rule_id"] == "block_not_clear"
    assert started.get("/status").json()["data"]["actions_executed"] == 0


def test_malformed_actions(started):
    assert started.post("/actions/fly", json={"block": "A"}).status_code == 404
    response = started.post("/actions/stack", json={"block": "A"})
    assert response.status_code == 400 and response.json()["error"]["rule_id"] == "malformed"
    response = started.post("/actions/pick_up", json={})
    assert response.status_code == 422 and response.json()["success"] is False


def test_verify(started):
    ok = started.post("/verify", json={"steps": SUSSMAN_STEPS}).json()["data"]
    assert ok == {"verified": True, "reaches_goal": True, "message": ok["message"]}
    bad = started.post("/verify", json={"steps": SUSSMAN_STEPS[1:]}).json()["data"]
    assert bad["verified"] is False and bad["first_bad_index"] == 0 and bad["rule_id"] == "gripper_empty"
    schema = started.post("/verify", json={"moves": []})
    assert schema.status_code == 400 and schema.json()["error"]["rule_id"] == "malformed"
    assert started.get("/status").json()["data"]["actions_executed"] == 0


def test_rules(started):
    data = started.get("/rules").json()["data"]
    assert data["constraint_set"] == "base"
    assert "3 fixed positions" in data["rules"]


def test_rules_without_session(client):
    assert client.get("/rules").status_code == 409


def test_hidden_block_answers_like_a_missing_one(client):
    client.post("/simulation/start", json={"scenario_id": "cat5/s01"})
    assert client.get("/status").json()["data"]["positions"][0] == ["unknown", "B", "C"]
    hidden = act(client, {"action": "pick_up", "block": "A"})
    missing = act(client, {"action": "pick_up", "block": "Z"})
    assert hidden.status_code == missing.status_code == 200
    hidden, missing = hidden.json()["error"], missing.json()["error"]
    assert hidden["rule_id"] == missing["rule_id"] == "unknown_block"
    assert hidden["message"].replace("A", "Z") == missing["message"]

    verdict = client.post("/verify", json={"steps": [{"action": "pick_up", "block": "A"}]}).json()["data"]
    assert verdict["rule_id"] == "unknown_block"
    assert "B" not in verdict["message"]



def test_stop(started):
    assert started.post("/simulation/stop").json()["data"]["running"] is False
    assert started.post("/simulation/stop").status_code == 409
