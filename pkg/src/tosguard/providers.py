"""Provider-agnostic chat, embedding and rerank clients.

The wire contract follows the de-facto JSON shapes served by common
local model servers (``/chat/completions``, ``/embeddings``) so local
and cloud models are interchangeable via ``base_url``; reranking uses a
minimal {query, documents} -> {scores} contract with response-shape
adapters. Deterministic offline stubs and a record/replay cassette
keep every test free of network access.

API keys are read from the environment only and never serialized.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import httpx

from .textutil import tokenize

Transport = Callable[[str, dict], dict]


class TransportError(RuntimeError):
    """Timeouts, connection failures, exhausted retries."""


class ProviderError(RuntimeError):
    """Non-2xx responses, malformed bodies, contract violations."""


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # "chat" | "embedding" | "rerank"
    base_url: str = ""
    model_name: str = ""
    api_key_env_var: str = ""
    timeout: float = 60.0
    max_retries: int = 2
    reasoning_enabled: bool = False  # chat only
    temperature: float = 0.0  # chat only
    max_tokens: int = 256

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass
class ChatResult:
    text: str
    token_usage: dict[str, int] = field(default_factory=lambda: {"prompt": 0, "completion": 0})
    latency_ms: float = 0.0
    retries: int = 0


class TokenBucket:
    """Simple per-provider rate limiter."""

    def __init__(self, rate_per_s: float, burst: int = 1):
        self.rate = rate_per_s
        self.capacity = float(burst)
        self.tokens = float(burst)
        self.updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


class HttpTransport:
    """POSTs JSON to ``base_url + path``; raises TransportError on
    connection problems and ProviderError on non-2xx responses."""

    def __init__(self, config: ProviderConfig, bucket: Optional[TokenBucket] = None):
        self.config = config
        self.bucket = bucket

    def __call__(self, path: str, payload: dict) -> dict:
        if self.bucket is not None:
            self.bucket.acquire()
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env_var) if self.config.api_key_env_var else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        url = self.config.base_url.rstrip("/") + path
        try:
            response = httpx.post(url, json=payload, headers=headers, timeout=self.config.timeout)
        except httpx.HTTPError as exc:
            raise TransportError(f"request to {url} failed: {exc}") from exc
        if response.status_code // 100 != 2:
            excerpt = response.text[:500]
            raise ProviderError(f"{url} returned {response.status_code}: {excerpt}")
        return response.json()


def _with_retries(
    call: Callable[[], dict],
    max_retries: int,
    backoff_s: float = 0.1,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[dict, int]:
    attempts = 0
    while True:
        try:
            return call(), attempts
        except TransportError:
            if attempts >= max_retries:
                raise
            sleep(backoff_s * (2**attempts))
            attempts += 1


# ---------------------------------------------------------------------------
# Cassette record/replay


def request_key(path: str, payload: dict) -> str:
    canonical = json.dumps({"path": path, "payload": payload}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class CassetteRecorder:
    """Wraps a transport and appends request-hash -> response lines."""

    def __init__(self, inner: Transport, path: str | Path):
        self.inner = inner
        self.path = Path(path)

    def __call__(self, path: str, payload: dict) -> dict:
        response = self.inner(path, payload)
        line = json.dumps(
            {"key": request_key(path, payload), "path": path, "response": response},
            ensure_ascii=False,
        )
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return response


class CassetteReplayer:
    """Replays recorded responses; misses raise ProviderError."""

    def __init__(self, path: str | Path):
        self.responses: dict[str, dict] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    entry = json.loads(line)
                    self.responses[entry["key"]] = entry["response"]

    def __call__(self, path: str, payload: dict) -> dict:
        key = request_key(path, payload)
        if key not in self.responses:
            raise ProviderError(f"cassette miss for request {key[:12]}... on {path}")
        return self.responses[key]


# ---------------------------------------------------------------------------
# Operations


def complete(
    config: ProviderConfig,
    prompt: str,
    transport: Optional[Transport] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatResult:
    if config.kind != "chat":
        raise ValueError(f"config kind must be 'chat', got {config.kind!r}")
    transport = transport or HttpTransport(config)
    payload: dict = {
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }
    if config.reasoning_enabled:
        payload["reasoning"] = {"enabled": True}
    started = time.monotonic()
    body, retries = _with_retries(
        lambda: transport("/chat/completions", payload), config.max_retries, sleep=sleep
    )
    latency_ms = (time.monotonic() - started) * 1000.0
    try:
        text = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProviderError(f"malformed chat response: {body!r}") from exc
    usage = body.get("usage", {})
    return ChatResult(
        text=text,
        token_usage={
            "prompt": int(usage.get("prompt_tokens", 0)),
            "completion": int(usage.get("completion_tokens", 0)),
        },
        latency_ms=latency_ms,
        retries=retries,
    )


def embed(
    config: ProviderConfig,
    texts: Sequence[str],
    transport: Optional[Transport] = None,
    batch_size: int = 64,
    sleep: Callable[[float], None] = time.sleep,
) -> list[list[float]]:
    if config.kind != "embedding":
        raise ValueError(f"config kind must be 'embedding', got {config.kind!r}")
    if not texts:
        raise ValueError("texts must be nonempty")
    transport = transport or HttpTransport(config)
    vectors: list[list[float]] = []
    for start in range(0, len(texts), batch_size):
        batch = list(texts[start : start + batch_size])
        payload = {"model": config.model_name, "input": batch}
        body, _ = _with_retries(
            lambda: transport("/embeddings", payload), config.max_retries, sleep=sleep
        )
        try:
            vectors.extend([item["embedding"] for item in body["data"]])
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"malformed embedding response: {body!r}") from exc
    dims = {len(v) for v in vectors}
    if len(dims) > 1:
        raise ProviderError(f"inconsistent embedding dimensions in batch: {sorted(dims)}")
    return vectors


def rerank_scores(
    config: ProviderConfig,
    query: str,
    texts: Sequence[str],
    transport: Optional[Transport] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[float]:
    if config.kind != "rerank":
        raise ValueError(f"config kind must be 'rerank', got {config.kind!r}")
    if not texts:
        return []
    transport = transport or HttpTransport(config)
    payload = {"model": config.model_name, "query": query, "documents": list(texts)}
    body, _ = _with_retries(
        lambda: transport("/rerank", payload), config.max_retries, sleep=sleep
    )
    if "scores" in body:
        scores = [float(s) for s in body["scores"]]
    elif "results" in body:  # cohere/jina-style shape
        scores = [0.0] * len(texts)
        for item in body["results"]:
            scores[int(item["index"])] = float(item["relevance_score"])
    else:
        raise ProviderError(f"malformed rerank response: {body!r}")
    if len(scores) != len(texts):
        raise ProviderError(f"expected {len(texts)} scores, got {len(scores)}")
    return scores


# ---------------------------------------------------------------------------
# Provider objects (what the pipeline consumes)


class HttpChatProvider:
    def __init__(self, config: ProviderConfig, transport: Optional[Transport] = None):
        self.config = config
        self.transport = transport
        self.calls = 0

    def complete(self, prompt: str) -> ChatResult:
        self.calls += 1
        return complete(self.config, prompt, self.transport)


class HttpEmbeddingProvider:
    def __init__(self, config: ProviderConfig, transport: Optional[Transport] = None):
        self.config = config
        self.transport = transport
        self.calls = 0

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        self.calls += 1
        return embed(self.config, texts, self.transport)


class HttpRerankProvider:
    def __init__(self, config: ProviderConfig, transport: Optional[Transport] = None):
        self.config = config
        self.transport = transport
        self.calls = 0

    def scores(self, query: str, texts: Sequence[str]) -> list[float]:
        self.calls += 1
        return rerank_scores(self.config, query, texts, self.transport)


# ---------------------------------------------------------------------------
# Deterministic offline stubs


class StubChatProvider:
    """Scripted chat stub.

    ``script`` maps a substring of the prompt to the canned completion;
    the first matching entry (in insertion order) wins, else ``default``.
    ``fail_times`` injects that many leading TransportErrors.
    """

    def __init__(self, script: Optional[dict[str, str]] = None, default: str = "", fail_times: int = 0):
        self.script = dict(script or {})
        self.default = default
        self.fail_times = fail_times
        self.calls = 0
        self.prompts: list[str] = []

    def complete(self, prompt: str) -> ChatResult:
        self.calls += 1
        if self.fail_times > 0:
            self.fail_times -= 1
            raise TransportError("scripted failure")
        self.prompts.append(prompt)
        for needle, response in self.script.items():
            if needle in prompt:
                return ChatResult(text=response)
        return ChatResult(text=self.default)


class StubEmbeddingProvider:
    """Hash-bucket embedder: each token adds 1 to the bucket
    ``sha1(token) % dim``; the result is L2-normalized. Texts sharing
    tokens therefore share buckets and score a higher cosine."""

    def __init__(self, dim: int = 64):
        self.dim = dim
        self.calls = 0

    @staticmethod
    def bucket(token: str, dim: int) -> int:
        digest = hashlib.sha1(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % dim

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        self.calls += 1
        out: list[list[float]] = []
        for text in texts:
            vec = [0.0] * self.dim
            for token in tokenize(text):
                vec[self.bucket(token, self.dim)] += 1.0
            norm = sum(x * x for x in vec) ** 0.5
            if norm > 0:
                vec = [x / norm for x in vec]
            out.append(vec)
        return out


def _http_provider(entry: dict, kind: str, cls):
    config = ProviderConfig(
        kind=kind,
        base_url=entry.get("base_url", ""),
        model_name=entry.get("model_name", ""),
        api_key_env_var=entry.get("api_key_env_var", ""),
        timeout=entry.get("timeout", 60.0),
        max_retries=entry.get("max_retries", 2),
        reasoning_enabled=entry.get("reasoning_enabled", False),
        temperature=entry.get("temperature", 0.0),
        max_tokens=entry.get("max_tokens", 256),
    )
    bucket = None
    if entry.get("rate_per_s"):
        bucket = TokenBucket(float(entry["rate_per_s"]), burst=int(entry.get("burst", 1)))
    transport: Optional[Transport] = HttpTransport(config, bucket)
    cassette = entry.get("cassette")
    if cassette:
        if cassette["mode"] == "record":
            transport = CassetteRecorder(transport, cassette["path"])
        elif cassette["mode"] == "replay":
            transport = CassetteReplayer(cassette["path"])
        else:
            raise ValueError(f"cassette mode must be record|replay, got {cassette['mode']!r}")
    return cls(config, transport)


def providers_from_config(config: dict):
    """Build (chat, embedder, reranker) from a declarative config dict.

    Each section is {"kind": "stub", ...} or {"kind": "http", ...};
    missing sections default to deterministic stubs.
    """
    chat_entry = config.get("chat", {"kind": "stub"})
    embed_entry = config.get("embedding", {"kind": "stub"})
    rerank_entry = config.get("rerank", {"kind": "stub"})

    if chat_entry.get("kind", "stub") == "stub":
        chat = StubChatProvider(
            script=chat_entry.get("script"), default=chat_entry.get("default", "")
        )
    else:
        chat = _http_provider(chat_entry, "chat", HttpChatProvider)

    if embed_entry.get("kind", "stub") == "stub":
        embedder = StubEmbeddingProvider(dim=embed_entry.get("dim", 64))
    else:
        embedder = _http_provider(embed_entry, "embedding", HttpEmbeddingProvider)

    if rerank_entry.get("kind", "stub") == "stub":
        reranker = StubRerankProvider()
    else:
        reranker = _http_provider(rerank_entry, "rerank", HttpRerankProvider)
    return chat, embedder, reranker


class StubRerankProvider:
    """Scores each candidate by the count of distinct shared tokens
    with the query."""

    def __init__(self, fail: bool = False):
        self.fail = fail
        self.calls = 0

    def scores(self, query: str, texts: Sequence[str]) -> list[float]:
        self.calls += 1
        if self.fail:
            raise ProviderError("scripted rerank failure")
        query_tokens = set(tokenize(query))
        return [float(len(query_tokens & set(tokenize(t)))) for t in texts]
