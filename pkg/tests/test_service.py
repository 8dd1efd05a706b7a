"""HTTP service tests: endpoints, validation, status codes, parity."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from helpsys import harness
from helpsys.service import MAX_BODY_BYTES, create_app


@pytest.fixture(scope="module")
def client(pipeline):
    app = create_app(pipeline=pipeline)
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="module")
def bare_client():
    app = create_app()
    with TestClient(app) as c:
        yield c


def post_query(client, payload, raw=None):
    body = raw if raw is not None else json.dumps(payload)
    return client.post(
        "/v1/query", content=body.encode(), headers={"content-type": "application/json"}
    )


class TestHealth:
    def test_loaded(self, client):
        r = client.get("/v1/health")
        assert r.status_code == 200
        body = r.json()
        assert body["model_kind"] == "c-bilstm"
        assert body["index_size"] > 0
        assert isinstance(body["version"], str)

    def test_unloaded_is_unavailable(self, bare_client):
        assert bare_client.get("/v1/health").status_code == 503

    def test_unloaded_query_is_unavailable(self, bare_client):
        assert post_query(bare_client, {"text": "x"}).status_code == 503


class TestQuery:
    def test_help_query_answered(self, client):
        r = post_query(client, {"text": "how do i set an alarm"})
        assert r.status_code == 200
        body = r.json()
        assert body["is_help"] is True
        assert body["match"]["response_id"] == "alarm.create"
        assert body["latency_ms"] >= 0.0

    def test_not_help_query_abstains(self, client):
        r = post_query(client, {"text": "set an alarm for 7am"})
        assert r.status_code == 200
        body = r.json()
        assert body["is_help"] is False
        assert body["match"] is None
        assert body["pos_baseline"] is None

    def test_optional_parameters_accepted(self, client):
        r = post_query(client, {"text": "how do i set an alarm", "threshold": 0.5, "k": 3})
        assert r.status_code == 200

    def test_matches_in_process_pipeline(self, client, pipeline):
        for text in (
            "how do i set an alarm",
            "how can i check the weather",
            "what time is it",
        ):
            got = post_query(client, {"text": text}).json()
            got.pop("latency_ms")
            want = harness.answer_query(pipeline, text)
            assert got == want, text

    def test_stateless_between_requests(self, client):
        a = post_query(client, {"text": "how do i snooze an alarm"}).json()
        b = post_query(client, {"text": "how do i snooze an alarm"}).json()
        a.pop("latency_ms")
        b.pop("latency_ms")
        assert a == b


class TestQueryValidation:
    def test_malformed_json(self, client):
        r = post_query(client, None, raw="{not json")
        assert r.status_code == 400
        assert "valid JSON" in r.json()["error"]

    def test_non_object_body(self, client):
        r = post_query(client, None, raw="[1, 2]")
        assert r.status_code == 400

    def test_missing_text(self, client):
        assert post_query(client, {}).status_code == 400

    def test_empty_text(self, client):
        assert post_query(client, {"text": ""}).status_code == 400
        assert post_query(client, {"text": "   "}).status_code == 400

    def test_text_wrong_type(self, client):
        assert post_query(client, {"text": 7}).status_code == 400

    def test_threshold_validation(self, client):
        assert post_query(client, {"text": "x", "threshold": "high"}).status_code == 400
        assert post_query(client, {"text": "x", "threshold": True}).status_code == 400
        assert post_query(client, {"text": "x", "threshold": 1.5}).status_code == 400
        assert post_query(client, {"text": "x", "threshold": -1.5}).status_code == 400

    def test_k_validation(self, client):
        assert post_query(client, {"text": "x", "k": 0}).status_code == 400
        assert post_query(client, {"text": "x", "k": 2.5}).status_code == 400
        assert post_query(client, {"text": "x", "k": True}).status_code == 400

    def test_unknown_fields_rejected(self, client):
        r = post_query(client, {"text": "x", "mode": "fast"})
        assert r.status_code == 400
        assert "unknown fields" in r.json()["error"]

    def test_oversized_body_rejected(self, client):
        pad = " " * (MAX_BODY_BYTES + 1)
        r = post_query(client, None, raw=json.dumps({"text": "x"}) + pad)
        assert r.status_code == 413

    def test_body_at_limit_accepted(self, client):
        base = json.dumps({"text": "how do i set an alarm"})
        raw = base + " " * (MAX_BODY_BYTES - len(base))
        assert len(raw.encode()) == MAX_BODY_BYTES
        assert post_query(client, None, raw=raw).status_code == 200


class TestSkills:
    def test_listing_sorted_with_samples(self, client):
        r = client.get("/v1/skills")
        assert r.status_code == 200
        body = r.json()
        names = [row["skill"] for row in body]
        assert names == sorted(names)
        alarm = next(row for row in body if row["skill"] == "alarm")
        assert "create" in alarm["actions"]
        assert alarm["actions"] == sorted(alarm["actions"])
        for row in body:
            assert row["sample_query"] is None or isinstance(row["sample_query"], str)

    def test_unloaded_is_unavailable(self, bare_client):
        assert bare_client.get("/v1/skills").status_code == 503


class TestFailureOpacity:
    def test_internal_errors_not_leaked(self):
        class Boom:
            pass

        app = create_app(pipeline=Boom())
        with TestClient(app, raise_server_exceptions=False) as c:
            r = post_query(c, {"text": "how do i set an alarm"})
            assert r.status_code == 500
            assert r.json()["error"] == "internal error"


class TestCors:
    def test_cross_origin_allowed(self, client):
        r = client.get("/v1/health", headers={"origin": "http://localhost:5173"})
        assert r.headers.get("access-control-allow-origin") in ("*", "http://localhost:5173")
