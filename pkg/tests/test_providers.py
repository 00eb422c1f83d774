import itertools
import json
import math

import pytest

from tosguard.providers import (
    CassetteRecorder,
    CassetteReplayer,
    ChatResult,
    ProviderConfig,
    ProviderError,
    StubChatProvider,
    StubEmbeddingProvider,
    StubRerankProvider,
    TransportError,
    complete,
    embed,
    request_key,
    rerank_scores,
)
from tosguard.textutil import tokenize

NOSLEEP = lambda seconds: None


def chat_config(**kwargs):
    return ProviderConfig(kind="chat", base_url="http://localhost:9", model_name="m", **kwargs)


class ScriptedTransport:
    """Returns canned bodies; optionally fails the first N calls."""

    def __init__(self, body, fail_times=0, exc=TransportError("boom")):
        self.body = body
        self.fail_times = fail_times
        self.exc = exc
        self.calls = []

    def __call__(self, path, payload):
        self.calls.append((path, payload))
        if self.fail_times > 0:
            self.fail_times -= 1
            raise self.exc
        return self.body if not callable(self.body) else self.body(path, payload)


def chat_body(text):
    return {
        "choices": [{"message": {"content": text}}],
        "usage": {"prompt_tokens": 10, "completion_tokens": 2},
    }


class TestComplete:
    def test_stub_echo(self):
        stub = StubChatProvider(default="ltd")
        assert stub.complete("cualquier cosa").text == "ltd"

    def test_fails_twice_then_succeeds(self):
        transport = ScriptedTransport(chat_body("ok"), fail_times=2)
        result = complete(chat_config(max_retries=3), "hola", transport, sleep=NOSLEEP)
        assert result.text == "ok"
        assert result.retries == 2
        assert len(transport.calls) == 3

    def test_no_retries_surfaces_transport_error(self):
        transport = ScriptedTransport(chat_body("x"), fail_times=1)
        with pytest.raises(TransportError):
            complete(chat_config(max_retries=0), "hola", transport, sleep=NOSLEEP)

    def test_provider_error_not_retried(self):
        transport = ScriptedTransport(chat_body("x"), fail_times=1, exc=ProviderError("500"))
        with pytest.raises(ProviderError):
            complete(chat_config(max_retries=3), "hola", transport, sleep=NOSLEEP)
        assert len(transport.calls) == 1

    def test_malformed_body_rejected(self):
        transport = ScriptedTransport({"weird": True})
        with pytest.raises(ProviderError, match="malformed"):
            complete(chat_config(), "hola", transport, sleep=NOSLEEP)

    def test_wrong_kind_rejected(self):
        config = ProviderConfig(kind="embedding")
        with pytest.raises(ValueError, match="chat"):
            complete(config, "hola", ScriptedTransport(chat_body("x")))

    def test_temperature_zero_and_reasoning_flag(self):
        transport = ScriptedTransport(chat_body("x"))
        complete(chat_config(), "hola", transport, sleep=NOSLEEP)
        payload = transport.calls[0][1]
        assert payload["temperature"] == 0.0
        assert "reasoning" not in payload
        transport2 = ScriptedTransport(chat_body("x"))
        complete(chat_config(reasoning_enabled=True), "hola", transport2, sleep=NOSLEEP)
        assert transport2.calls[0][1]["reasoning"] == {"enabled": True}

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ProviderConfig(kind="chat", timeout=0)
        with pytest.raises(ValueError):
            ProviderConfig(kind="chat", max_retries=-1)


class TestEmbed:
    def test_stub_identical_texts_identical_vectors(self):
        stub = StubEmbeddingProvider(16)
        a, b = stub.embed(["misma frase exacta", "misma frase exacta"])
        assert a == b

    def test_stub_dimension(self):
        stub = StubEmbeddingProvider(64)
        vectors = stub.embed(["uno", "dos", "tres"])
        assert len(vectors) == 3
        assert all(len(v) == 64 for v in vectors)

    def test_shared_words_raise_cosine(self):
        # oracle computed against the stub's published hash rule
        stub = StubEmbeddingProvider(64)
        cases = [
            ("contrato de servicio digital", "contrato de servicio digital móvil", "política privacidad datos"),
            ("usuario acepta términos", "usuario acepta condiciones", "factura electrónica mensual"),
            ("responsabilidad limitada daños", "responsabilidad limitada perjuicios", "envío gratis promoción"),
            ("modificación unilateral términos", "modificación unilateral contrato", "menú restaurante postre"),
            ("terminación sin causa", "terminación sin aviso", "jardín botánico flores"),
            ("precio tarifa aumento", "precio tarifa ajuste", "telescopio astronomía luna"),
            ("reembolso dinero devolución", "reembolso dinero plazo", "bicicleta montaña casco"),
            ("cuenta suspensión acceso", "cuenta suspensión bloqueo", "pintura acuarela lienzo"),
            ("datos personales terceros", "datos personales compartir", "guitarra cuerdas acordes"),
            ("garantía legal producto", "garantía legal cobertura", "maratón kilómetros atleta"),
        ]

        def oracle_vec(text):
            vec = [0.0] * 64
            for token in tokenize(text):
                vec[StubEmbeddingProvider.bucket(token, 64)] += 1.0
            norm = math.sqrt(sum(x * x for x in vec))
            return [x / norm for x in vec]

        def cosine(u, v):
            return sum(a * b for a, b in zip(u, v))

        for query, overlapping, disjoint in cases:
            vq, vo, vd = stub.embed([query, overlapping, disjoint])
            assert vq == oracle_vec(query)
            assert cosine(vq, vo) > cosine(vq, vd)

    def test_http_shape(self):
        bodies = {"data": [{"embedding": [1.0, 0.0]}, {"embedding": [0.0, 1.0]}]}
        transport = ScriptedTransport(bodies)
        config = ProviderConfig(kind="embedding", model_name="e")
        vectors = embed(config, ["a", "b"], transport, sleep=NOSLEEP)
        assert vectors == [[1.0, 0.0], [0.0, 1.0]]

    def test_dimension_inconsistency_rejected(self):
        bodies = {"data": [{"embedding": [1.0, 0.0]}, {"embedding": [0.0, 1.0, 2.0]}]}
        transport = ScriptedTransport(bodies)
        config = ProviderConfig(kind="embedding")
        with pytest.raises(ProviderError, match="inconsistent"):
            embed(config, ["a", "b"], transport, sleep=NOSLEEP)

    def test_empty_texts_rejected(self):
        config = ProviderConfig(kind="embedding")
        with pytest.raises(ValueError, match="nonempty"):
            embed(config, [], ScriptedTransport({}))

    def test_batching_transparent(self):
        def body(path, payload):
            return {"data": [{"embedding": [1.0]} for _ in payload["input"]]}

        transport = ScriptedTransport(body)
        config = ProviderConfig(kind="embedding")
        vectors = embed(config, [f"t{i}" for i in range(130)], transport, batch_size=64, sleep=NOSLEEP)
        assert len(vectors) == 130
        assert len(transport.calls) == 3


class TestRerank:
    def test_empty_texts(self):
        config = ProviderConfig(kind="rerank")
        assert rerank_scores(config, "q", [], ScriptedTransport({})) == []

    def test_stub_self_similarity(self):
        stub = StubRerankProvider()
        scores = stub.scores("una consulta legal", ["una consulta legal", "otra cosa distinta"])
        assert scores[0] >= scores[1]

    def test_stub_matches_overlap_oracle(self):
        stub = StubRerankProvider()
        query = "limitación de responsabilidad por daños"
        candidates = [
            "limitación de responsabilidad contractual",
            "daños y perjuicios por responsabilidad",
            "política de privacidad del sitio",
            "de la limitación por daños responsabilidad",
            "sin relación alguna",
            "por daños",
            "limitación",
            "responsabilidad de daños por limitación de",
            "texto neutro uno",
            "texto neutro dos",
        ]
        got = stub.scores(query, candidates)
        qset = set(tokenize(query))
        expected = [float(len(qset & set(tokenize(c)))) for c in candidates]
        assert got == expected

    def test_scores_shape(self):
        transport = ScriptedTransport({"scores": [0.1, 0.9]})
        config = ProviderConfig(kind="rerank")
        assert rerank_scores(config, "q", ["a", "b"], transport, sleep=NOSLEEP) == [0.1, 0.9]

    def test_results_shape_adapter(self):
        body = {"results": [{"index": 1, "relevance_score": 0.9}, {"index": 0, "relevance_score": 0.2}]}
        transport = ScriptedTransport(body)
        config = ProviderConfig(kind="rerank")
        assert rerank_scores(config, "q", ["a", "b"], transport, sleep=NOSLEEP) == [0.2, 0.9]

    def test_score_count_mismatch_rejected(self):
        transport = ScriptedTransport({"scores": [0.5]})
        config = ProviderConfig(kind="rerank")
        with pytest.raises(ProviderError, match="expected 2"):
            rerank_scores(config, "q", ["a", "b"], transport, sleep=NOSLEEP)


class TestCassette:
    def test_record_then_replay(self, tmp_path):
        path = tmp_path / "cassette.jsonl"
        inner = ScriptedTransport(chat_body("grabado"))
        recorder = CassetteRecorder(inner, path)
        config = chat_config()
        first = complete(config, "hola", recorder, sleep=NOSLEEP)
        replayer = CassetteReplayer(path)
        second = complete(config, "hola", replayer, sleep=NOSLEEP)
        assert second.text == first.text == "grabado"
        assert len(inner.calls) == 1  # replay never touched the inner transport

    def test_replay_miss_raises(self, tmp_path):
        path = tmp_path / "cassette.jsonl"
        recorder = CassetteRecorder(ScriptedTransport(chat_body("x")), path)
        complete(chat_config(), "hola", recorder, sleep=NOSLEEP)
        replayer = CassetteReplayer(path)
        with pytest.raises(ProviderError, match="miss"):
            complete(chat_config(), "otra consulta", replayer, sleep=NOSLEEP)

    def test_no_api_key_in_cassette(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SECRET_KEY_VAR", "super-secret-token")
        path = tmp_path / "cassette.jsonl"
        recorder = CassetteRecorder(ScriptedTransport(chat_body("x")), path)
        config = chat_config(api_key_env_var="SECRET_KEY_VAR")
        complete(config, "hola", recorder, sleep=NOSLEEP)
        content = path.read_text(encoding="utf-8")
        assert "super-secret-token" not in content

    def test_request_key_stable(self):
        a = request_key("/chat/completions", {"b": 1, "a": 2})
        b = request_key("/chat/completions", {"a": 2, "b": 1})
        assert a == b


class TestStubDeterminism:
    def test_pipeline_stub_outputs_stable(self):
        chat = StubChatProvider(script={"daños": "ltd"}, default="cr")
        embedder = StubEmbeddingProvider(32)
        reranker = StubRerankProvider()
        outputs = []
        for _ in range(2):
            run = {
                "chat": chat.complete("cláusula sobre daños").text,
                "vec": embedder.embed(["una frase"])[0],
                "scores": reranker.scores("q legal", ["q legal", "otro"]),
            }
            outputs.append(json.dumps(run, sort_keys=True))
        assert outputs[0] == outputs[1]
