"""Knowledge-base indexes and retrieval: BM25, dense cosine, hybrid merge, rerank.

Dense search is exact (brute-force cosine over the store); at the
corpus scale this engine targets (~10^4 clauses) approximate indexes
buy nothing and exactness keeps retrieval oracle-testable. Sparse
scoring is Okapi BM25 with k1=1.2, b=0.75 defaults; zero-score
candidates are dropped, so sparse lists may run short of P.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence

import numpy as np

from .textutil import tokenize

DEFAULT_P = 15
DEFAULT_K = 5

_DENSE_MAGIC = b"TGDI"
_DENSE_VERSION = 1


class RetrievalError(ValueError):
    pass


class RerankFailure(RuntimeError):
    """Reranker provider failure, carrying provider diagnostics."""


class EmbeddingProviderLike(Protocol):
    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class RerankProviderLike(Protocol):
    def scores(self, query: str, texts: Sequence[str]) -> list[float]: ...


@dataclass(frozen=True)
class Candidate:
    clause_id: str
    score: float
    source: str  # "dense" | "sparse"
    secondary_score: Optional[float] = None  # other source's score on a dual hit


@dataclass(frozen=True)
class RerankedExample:
    clause_id: str
    relevance: float
    rank: int  # 1-based, contiguous


# ---------------------------------------------------------------------------
# Dense index


class DenseIndex:
    def __init__(self, ids: Sequence[str], matrix: np.ndarray, normalized: bool = True):
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or len(ids) != matrix.shape[0]:
            raise RetrievalError("ids and matrix rows must align")
        if not np.isfinite(matrix).all():
            raise RetrievalError("dense index contains non-finite values")
        self.ids = list(ids)
        self.matrix = matrix
        self.normalized = normalized
        self.d = int(matrix.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def save(self, path: str | Path) -> None:
        id_blob = json.dumps(self.ids, ensure_ascii=False).encode("utf-8")
        header = struct.pack(
            "<4sIIIB", _DENSE_MAGIC, _DENSE_VERSION, self.d, len(self.ids), int(self.normalized)
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.matrix.astype("<f4").tobytes(order="C"))
            fh.write(id_blob)

    @classmethod
    def load(cls, path: str | Path) -> "DenseIndex":
        blob = Path(path).read_bytes()
        magic, version, d, count, normalized = struct.unpack_from("<4sIIIB", blob, 0)
        if magic != _DENSE_MAGIC or version != _DENSE_VERSION:
            raise RetrievalError(f"not a dense index file: {path}")
        offset = struct.calcsize("<4sIIIB")
        vec_bytes = count * d * 4
        matrix = np.frombuffer(blob[offset : offset + vec_bytes], dtype="<f4").reshape(count, d)
        ids = json.loads(blob[offset + vec_bytes :].decode("utf-8"))
        return cls(ids, matrix.copy(), bool(normalized))


def dense_search(index: DenseIndex, query_vector: Sequence[float], p: int) -> list[Candidate]:
    """Exact top-P by cosine similarity, ties broken by clause_id."""
    query = np.asarray(query_vector, dtype=np.float64)
    if query.shape != (index.d,):
        raise RetrievalError(f"query dimension {query.shape} != index dimension {index.d}")
    norm = np.linalg.norm(query)
    if norm == 0.0:
        raise RetrievalError("zero-norm query vector")
    query = query / norm
    matrix = index.matrix.astype(np.float64)
    if not index.normalized:
        row_norms = np.linalg.norm(matrix, axis=1)
        row_norms[row_norms == 0.0] = 1.0
        matrix = matrix / row_norms[:, None]
    sims = matrix @ query
    order = sorted(range(len(index)), key=lambda i: (-sims[i], index.ids[i]))[:p]
    return [Candidate(index.ids[i], float(sims[i]), "dense") for i in order]


# ---------------------------------------------------------------------------
# Sparse index (BM25)


class SparseIndex:
    def __init__(self, k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.postings: dict[str, dict[str, int]] = {}  # term -> {doc_id: tf}
        self.doc_len: dict[str, int] = {}
        self.avgdl = 0.0

    @property
    def doc_count(self) -> int:
        return len(self.doc_len)

    @classmethod
    def build(cls, docs: Sequence[tuple[str, str]], k1: float = 1.2, b: float = 0.75) -> "SparseIndex":
        index = cls(k1=k1, b=b)
        for doc_id, text in docs:
            tokens = tokenize(text)
            index.doc_len[doc_id] = len(tokens)
            for term, tf in Counter(tokens).items():
                index.postings.setdefault(term, {})[doc_id] = tf
        total = sum(index.doc_len.values())
        index.avgdl = total / len(index.doc_len) if index.doc_len else 0.0
        return index

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, {}))
        n = self.doc_count
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def term_score(self, term: str, tf: int, dl: int) -> float:
        k1, b = self.k1, self.b
        denom = tf + k1 * (1.0 - b + b * dl / self.avgdl)
        return self.idf(term) * tf * (k1 + 1.0) / denom

    def score_all(self, query_text: str) -> dict[str, float]:
        scores: dict[str, float] = {}
        for term in tokenize(query_text):
            for doc_id, tf in self.postings.get(term, {}).items():
                scores[doc_id] = scores.get(doc_id, 0.0) + self.term_score(
                    term, tf, self.doc_len[doc_id]
                )
        return scores

    def save(self, path: str | Path) -> None:
        payload = {
            "k1": self.k1,
            "b": self.b,
            "avgdl": self.avgdl,
            "doc_len": self.doc_len,
            "postings": self.postings,
        }
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, ensure_ascii=False), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "SparseIndex":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        index = cls(k1=payload["k1"], b=payload["b"])
        index.avgdl = payload["avgdl"]
        index.doc_len = {k: int(v) for k, v in payload["doc_len"].items()}
        index.postings = {
            term: {doc: int(tf) for doc, tf in docs.items()}
            for term, docs in payload["postings"].items()
        }
        return index


def sparse_search(index: SparseIndex, query_text: str, p: int) -> list[Candidate]:
    """Top-P BM25 candidates; zero-score documents are dropped."""
    scores = index.score_all(query_text)
    ranked = sorted(
        ((doc_id, s) for doc_id, s in scores.items() if s > 0.0),
        key=lambda item: (-item[1], item[0]),
    )[:p]
    return [Candidate(doc_id, float(s), "sparse") for doc_id, s in ranked]


# ---------------------------------------------------------------------------
# Build + merge + rerank


def build_indexes(
    clauses: Sequence[tuple[str, str]],
    embedder: EmbeddingProviderLike,
    k1: float = 1.2,
    b: float = 0.75,
    normalize: bool = True,
) -> tuple[DenseIndex, SparseIndex]:
    """Embed and index (clause_id, text) pairs.

    Deterministic given a deterministic embedder; embedding dimension
    drift mid-build is rejected.
    """
    if not clauses:
        raise RetrievalError("cannot build indexes from zero clauses")
    ids = [cid for cid, _ in clauses]
    if len(set(ids)) != len(ids):
        raise RetrievalError("duplicate clause ids in index input")
    vectors = embedder.embed([text for _, text in clauses])
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise RetrievalError(f"embedder dimension drift during build: {sorted(dims)}")
    matrix = np.asarray(vectors, dtype=np.float64)
    if normalize:
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        matrix = matrix / norms
    dense = DenseIndex(ids, matrix.astype(np.float32), normalized=normalize)
    sparse = SparseIndex.build(clauses, k1=k1, b=b)
    return dense, sparse


def hybrid_merge(dense: Sequence[Candidate], sparse: Sequence[Candidate]) -> list[Candidate]:
    """Union the two top-P lists, interleaving by per-source rank.

    A clause found by both sources appears once (at its first
    interleave position) with the other source's score retained in
    ``secondary_score``. Output size is at most len(dense)+len(sparse).
    """
    merged: list[Candidate] = []
    position: dict[str, int] = {}
    for pair in range(max(len(dense), len(sparse))):
        for source_list in (dense, sparse):
            if pair >= len(source_list):
                continue
            cand = source_list[pair]
            if cand.clause_id in position:
                idx = position[cand.clause_id]
                if merged[idx].secondary_score is None:
                    merged[idx] = dataclasses.replace(merged[idx], secondary_score=cand.score)
                continue
            position[cand.clause_id] = len(merged)
            merged.append(cand)
    return merged


def rerank(
    reranker: RerankProviderLike,
    query_text: str,
    candidates: Sequence[Candidate],
    k: int,
    texts: Mapping[str, str],
    fallback_to_retrieval_order: bool = False,
) -> list[RerankedExample]:
    """Top-k candidates by reranker relevance; retrieval scores do not
    participate in the ranking decision.

    On provider failure, raises RerankFailure unless the caller opted
    into the retrieval-order fallback.
    """
    if k > len(candidates):
        raise RetrievalError(f"k={k} exceeds candidate count {len(candidates)}")
    candidate_texts = [texts[c.clause_id] for c in candidates]
    try:
        relevances = reranker.scores(query_text, candidate_texts)
    except Exception as exc:
        if not fallback_to_retrieval_order:
            raise RerankFailure(f"reranker failed: {exc}") from exc
        # synthetic descending relevance preserves retrieval order
        relevances = [float(len(candidates) - i) for i in range(len(candidates))]
    order = sorted(
        range(len(candidates)),
        key=lambda i: (-relevances[i], candidates[i].clause_id),
    )[:k]
    return [
        RerankedExample(candidates[i].clause_id, float(relevances[i]), rank)
        for rank, i in enumerate(order, start=1)
    ]
