import json
import random

import pytest
from fastapi.testclient import TestClient

from tosguard.pipeline import ScanConfig
from tosguard.providers import StubChatProvider
from tosguard.server import create_app

from conftest import synth_text
from test_pipeline import abusive_html, make_engine


@pytest.fixture
def client():
    chat = StubChatProvider(script={"irrevocable": "ltd"}, default="")
    engine = make_engine(chat=chat, config=ScanConfig(categories=("dark",)))
    app = create_app(engine, sync_limit=200_000, hard_cap=400_000)
    return TestClient(app)


class TestScanEndpoint:
    def test_clean_document_no_findings(self, client):
        rng = random.Random(3)
        html = "".join(f"<p>{synth_text(rng, words=12)}</p>" for _ in range(3))
        response = client.post("/api/v1/scan", json={"content": html, "content_type": "html"})
        assert response.status_code == 200
        assert response.json()["findings"] == []

    def test_stub_backed_finding(self, client):
        response = client.post(
            "/api/v1/scan", json={"content": abusive_html(), "content_type": "html"}
        )
        assert response.status_code == 200
        findings = response.json()["findings"]
        assert len(findings) == 1
        assert findings[0]["labels"]["dark"] == ["ltd"]
        assert findings[0]["label_details"][0]["explanation"]

    def test_invalid_content_type_400(self, client):
        response = client.post(
            "/api/v1/scan", json={"content": "<p>hola</p>", "content_type": "pdf"}
        )
        assert response.status_code == 400
        assert "content_type" in response.json()["error"]

    def test_empty_content_400(self, client):
        response = client.post("/api/v1/scan", json={"content": "", "content_type": "html"})
        assert response.status_code == 400
        assert "content" in response.json()["error"]

    def test_over_hard_cap_413(self, client):
        big = "x" * 400_001
        response = client.post("/api/v1/scan", json={"content": big, "content_type": "text"})
        assert response.status_code == 413

    def test_unknown_category_400(self, client):
        response = client.post(
            "/api/v1/scan",
            json={
                "content": "<p>hola mundo</p>",
                "content_type": "html",
                "options": {"categories": ["purple"]},
            },
        )
        assert response.status_code == 400

    def test_byte_stable_responses(self, client):
        body = {"content": abusive_html(), "content_type": "html"}
        first = client.post("/api/v1/scan", json=body)
        second = client.post("/api/v1/scan", json=body)
        assert first.content == second.content

    def test_async_path_over_sync_limit(self):
        chat = StubChatProvider(script={"irrevocable": "ltd"}, default="")
        engine = make_engine(chat=chat, config=ScanConfig(categories=("dark",)))
        app = create_app(engine, sync_limit=1_000, hard_cap=10_000_000)
        test_client = TestClient(app)
        padding = "<p>hola</p>" * 500
        response = test_client.post(
            "/api/v1/scan",
            json={"content": abusive_html() + padding, "content_type": "html"},
        )
        assert response.status_code == 202
        job_id = response.json()["job_id"]
        poll = test_client.get(f"/api/v1/scan/{job_id}")
        assert poll.status_code == 200
        payload = poll.json()
        assert payload["status"] == "done"
        assert len(payload["result"]["findings"]) == 1

    def test_unknown_job_404(self, client):
        assert client.get("/api/v1/scan/doesnotexist").status_code == 404

    def test_providers_unreachable_503_with_partials(self):
        chat = StubChatProvider(default="ltd", fail_times=10_000)
        engine = make_engine(
            chat=chat,
            config=ScanConfig(categories=("dark",), include_similar=False),
        )
        test_client = TestClient(create_app(engine))
        response = test_client.post(
            "/api/v1/scan",
            json={
                "content": abusive_html(),
                "content_type": "html",
                "options": {"include_similar": False},
            },
        )
        assert response.status_code == 503
        payload = response.json()
        assert payload["error"] == "providers unreachable"
        assert len(payload["partial"]["findings"]) == 1


class TestLabelsEndpoint:
    def test_24_entries(self, client):
        response = client.get("/api/v1/labels")
        assert response.status_code == 200
        labels = response.json()["labels"]
        assert len(labels) == 24

    def test_category_partition(self, client):
        labels = client.get("/api/v1/labels").json()["labels"]
        by_category = {}
        for entry in labels:
            by_category.setdefault(entry["category"], []).append(entry["code"])
        assert len(by_category["illegal"]) == 9
        assert len(by_category["dark"]) == 6
        assert len(by_category["gray"]) == 9

    def test_etag_stable(self, client):
        first = client.get("/api/v1/labels")
        second = client.get("/api/v1/labels")
        assert first.headers["etag"] == second.headers["etag"]
        assert first.content == second.content


class TestSimilarEndpoint:
    def test_k_zero_400(self, client):
        response = client.get("/api/v1/similar", params={"clause_text": "hola", "k": 0})
        assert response.status_code == 400

    def test_empty_text_400(self, client):
        response = client.get("/api/v1/similar", params={"clause_text": "  ", "k": 3})
        assert response.status_code == 400

    def test_indexed_clause_ranks_first(self, client):
        chat = StubChatProvider(default="")
        engine = make_engine(chat=chat)
        test_client = TestClient(create_app(engine))
        target_id = engine.kb.dense.ids[0]
        text = engine.kb.texts[target_id]
        response = test_client.get("/api/v1/similar", params={"clause_text": text, "k": 3})
        assert response.status_code == 200
        similar = response.json()["similar"]
        assert similar[0]["clause_id"] == target_id

    def test_matches_in_process_result(self):
        engine = make_engine(n_abusive=10)
        test_client = TestClient(create_app(engine))
        rng = random.Random(7)
        query = synth_text(rng, labels=["ltd"], words=10)
        response = test_client.get("/api/v1/similar", params={"clause_text": query, "k": 5})
        got = response.json()["similar"]
        expected = engine.similar(query, 5)
        assert [s["clause_id"] for s in got] == [e.clause_id for e in expected]
        assert [s["relevance"] for s in got] == [e.relevance for e in expected]


class TestHealth:
    def test_health(self, client):
        response = client.get("/api/v1/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"
        assert response.json()["indexed_clauses"] > 0
