import pytest
from fastapi.testclient import TestClient

from tableqa.config import AppConfig, StoreConfig
from tableqa.pipeline import Application
from tableqa.service import create_app

SMALL = AppConfig(store=StoreConfig(seed=3, rows_per_table=200), deterministic_ids=True)


@pytest.fixture(scope="module")
def client():
    app = create_app(application=Application(SMALL))
    with TestClient(app) as client:
        yield client


def open_session(client, user_id="analyst"):
    response = client.post("/sessions", json={"user_id": user_id})
    assert response.status_code == 200
    return response.json()


def test_health_lists_tables(client):
    payload = client.get("/health").json()
    assert payload["status"] == "ok"
    assert "emissions_scope1" in payload["tables"]


def test_cross_origin_browser_clients_allowed(client):
    response = client.get("/health", headers={"origin": "http://localhost:5173"})
    assert response.headers.get("access-control-allow-origin") == "*"


def test_open_session_returns_grants(client):
    payload = open_session(client)
    assert payload["session_id"]
    assert payload["role"] == "analyst"
    assert "water_consumption" in payload["tables"]


def test_unknown_user_is_404(client):
    assert client.post("/sessions", json={"user_id": "nobody"}).status_code == 404


def test_user_and_profile_together_rejected(client):
    response = client.post(
        "/sessions",
        json={"user_id": "analyst", "profile": {"user_id": "x", "grants": []}},
    )
    assert response.status_code == 422


def test_inline_profile_session(client):
    response = client.post(
        "/sessions",
        json={
            "profile": {
                "user_id": "temp",
                "grants": [{"table": "water_consumption"}],
            }
        },
    )
    assert response.status_code == 200
    assert response.json()["tables"] == ["water_consumption"]


def test_query_payload_shape(client):
    session = open_session(client)
    response = client.post(
        f"/sessions/{session['session_id']}/query",
        json={"query": "What is scope 1 emission levels for offices in Argentina?"},
    )
    assert response.status_code == 200
    payload = response.json()
    assert payload["kind"] == "answer"
    assert payload["llm_calls"] == 3
    assert payload["scores"] is not None and len(payload["scores"]) == 5
    assert sorted(payload["stage_timings"]) == [
        "answer", "route", "run_query", "score", "sql_gen",
    ]
    assert payload["sql_model"] and "emissions_scope1" in payload["sql_model"]


def test_faq_payload_carries_sources(client):
    session = open_session(client)
    payload = client.post(
        f"/sessions/{session['session_id']}/query",
        json={"query": "What is included in business travel?"},
    ).json()
    assert payload["kind"] == "answer"
    assert payload["llm_calls"] == 2
    assert payload["sources"] == ["methodology_notes"]


def test_error_kinds_have_null_scores(client):
    session = open_session(client, user_id="visitor")
    payload = client.post(
        f"/sessions/{session['session_id']}/query",
        json={"query": "Which country has the highest emissions?"},
    ).json()
    assert payload["kind"] == "access_error"
    assert payload["scores"] is None
    assert payload["llm_calls"] == 0


def test_empty_query_is_422(client):
    session = open_session(client)
    response = client.post(
        f"/sessions/{session['session_id']}/query", json={"query": "   "}
    )
    assert response.status_code == 422


def test_unknown_session_is_404(client):
    assert (
        client.post("/sessions/ghost/query", json={"query": "anything"}).status_code
        == 404
    )


def test_debug_carries_prompts_and_staged_rows(client):
    session = open_session(client)
    sid = session["session_id"]
    payload = client.post(
        f"/sessions/{sid}/query",
        json={"query": "Which city had the highest water consumption for Dec 2022?"},
    ).json()
    debug = client.get(f"/sessions/{sid}/trace/{payload['query_index']}/debug")
    assert debug.status_code == 200
    body = debug.json()
    assert len(body["prompts"]) == payload["llm_calls"]
    assert [p["role"] for p in body["prompts"]] == ["route", "sql_gen", "answer"]
    assert all(p["body"] for p in body["prompts"])
    assert body["staged"]["columns"]
    assert body["staged"]["rows"]
    assert body["evidence"] is not None


def test_debug_404_for_unknown_trace(client):
    session = open_session(client)
    response = client.get(f"/sessions/{session['session_id']}/trace/99/debug")
    assert response.status_code == 404


def test_close_session_drops_traces(client):
    session = open_session(client)
    sid = session["session_id"]
    payload = client.post(
        f"/sessions/{sid}/query", json={"query": "What is included in business travel?"}
    ).json()
    closed = client.delete(f"/sessions/{sid}")
    assert closed.status_code == 200
    assert closed.json() == {"closed": True, "queries_asked": 1}
    assert client.delete(f"/sessions/{sid}").status_code == 404
    assert (
        client.get(f"/sessions/{sid}/trace/{payload['query_index']}/debug").status_code
        == 404
    )
