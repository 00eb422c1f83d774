"""Scan orchestration and the retrieval-only majority-vote baseline.

The scan path is: chunk the document, run the cheap linear filter,
then for each flagged chunk run RAG classification once per enabled
category. Unflagged chunks never reach a language model, so the number
of chat calls is exactly flagged_chunks x enabled_categories. Provider
failures mark the affected finding and never abort the scan.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .chunking import Chunk, chunk_html, chunk_text
from .corpus import Clause, TaskSpec, task_by_name
from .detector import LinearDetector, detect
from .prompting import PromptBundle, PromptExample, build_rag_prompt, parse_labels
from .retrieval import (
    DEFAULT_K,
    DEFAULT_P,
    Candidate,
    DenseIndex,
    EmbeddingProviderLike,
    RerankProviderLike,
    SparseIndex,
    build_indexes,
    dense_search,
    hybrid_merge,
    rerank,
    sparse_search,
)
from .taxonomy import CATEGORIES, Taxonomy

FINDINGS_SCHEMA_VERSION = 1


class PipelineError(RuntimeError):
    pass


@dataclass
class KnowledgeBase:
    """Annotated-clause store: dense + sparse indexes plus label lookup."""

    dense: DenseIndex
    sparse: SparseIndex
    texts: dict[str, str]
    labels: dict[str, frozenset[str]]

    @classmethod
    def build(
        cls,
        entries: Sequence[tuple[str, str, frozenset[str]]],
        embedder: EmbeddingProviderLike,
        k1: float = 1.2,
        b: float = 0.75,
    ) -> "KnowledgeBase":
        docs = [(cid, text) for cid, text, _ in entries]
        dense, sparse = build_indexes(docs, embedder, k1=k1, b=b)
        return cls(
            dense=dense,
            sparse=sparse,
            texts={cid: text for cid, text, _ in entries},
            labels={cid: frozenset(labels) for cid, _, labels in entries},
        )

    @classmethod
    def from_clauses(
        cls, clauses: Sequence[Clause], embedder: EmbeddingProviderLike
    ) -> "KnowledgeBase":
        return cls.build([(c.id, c.text, c.labels) for c in clauses], embedder)

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.dense.save(directory / "dense.bin")
        self.sparse.save(directory / "sparse.json")
        with open(directory / "clauses.jsonl", "w", encoding="utf-8") as fh:
            for cid in self.dense.ids:
                record = {
                    "id": cid,
                    "text": self.texts[cid],
                    "labels": sorted(self.labels[cid]),
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "KnowledgeBase":
        directory = Path(directory)
        dense = DenseIndex.load(directory / "dense.bin")
        sparse = SparseIndex.load(directory / "sparse.json")
        texts: dict[str, str] = {}
        labels: dict[str, frozenset[str]] = {}
        with open(directory / "clauses.jsonl", "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    record = json.loads(line)
                    texts[record["id"]] = record["text"]
                    labels[record["id"]] = frozenset(record["labels"])
        return cls(dense=dense, sparse=sparse, texts=texts, labels=labels)


@dataclass
class ScanConfig:
    categories: tuple[str, ...] = CATEGORIES
    retrieval_mode: str = "hybrid"  # "dense" | "hybrid"
    p: int = DEFAULT_P
    k: int = DEFAULT_K
    min_words: int = 7
    threshold: Optional[float] = None  # detector threshold override
    include_similar: bool = True
    max_similar: int = 5
    rerank_fallback: bool = False
    keep_prompt_audit: bool = False


@dataclass
class SimilarExample:
    clause_id: str
    text: str
    labels: tuple[str, ...]
    relevance: float


@dataclass
class ClauseFinding:
    chunk: Chunk
    detection_score: float
    labels: dict[str, tuple[str, ...]]  # category -> predicted codes
    label_details: list[dict]
    similar_examples: list[SimilarExample]
    errors: list[dict] = field(default_factory=list)
    prompt_audit: Optional[list[dict]] = None


def findings_to_json(findings: Sequence[ClauseFinding]) -> str:
    """Canonical findings JSON: stable key order, no timing fields."""
    payload = {
        "version": FINDINGS_SCHEMA_VERSION,
        "findings": [
            {
                "chunk": {
                    "text": f.chunk.text,
                    "char_span": list(f.chunk.char_span),
                    "dom_path": list(f.chunk.dom_path),
                    "word_count": f.chunk.word_count,
                },
                "detection_score": round(f.detection_score, 12),
                "labels": {cat: list(codes) for cat, codes in f.labels.items()},
                "label_details": f.label_details,
                "similar_examples": [
                    {
                        "clause_id": s.clause_id,
                        "text": s.text,
                        "labels": list(s.labels),
                        "relevance": s.relevance,
                    }
                    for s in f.similar_examples
                ],
                "errors": f.errors,
                "prompt_audit": f.prompt_audit,
            }
            for f in findings
        ],
    }
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2)


class Engine:
    """Bundles trained detector, knowledge base and providers for scans."""

    def __init__(
        self,
        taxonomy: Taxonomy,
        detector: LinearDetector,
        kb: KnowledgeBase,
        embedder: EmbeddingProviderLike,
        reranker: RerankProviderLike,
        chat,
        config: Optional[ScanConfig] = None,
        template_dir: Optional[str] = None,
    ):
        self.taxonomy = taxonomy
        self.detector = detector
        self.kb = kb
        self.embedder = embedder
        self.reranker = reranker
        self.chat = chat
        self.config = config or ScanConfig()
        self.template_dir = template_dir

    def with_config(self, config: ScanConfig) -> "Engine":
        """Shallow copy sharing indexes/providers but a different config."""
        clone = copy.copy(self)
        clone.config = config
        return clone

    # -- retrieval ----------------------------------------------------------
    def retrieve(self, query_text: str, mode: Optional[str] = None, p: Optional[int] = None) -> list[Candidate]:
        mode = mode or self.config.retrieval_mode
        p = p or self.config.p
        query_vec = self.embedder.embed([query_text])[0]
        dense = dense_search(self.kb.dense, query_vec, p)
        if mode == "dense":
            return dense
        sparse = sparse_search(self.kb.sparse, query_text, p)
        return hybrid_merge(dense, sparse)

    def similar(self, query_text: str, k: int) -> list[SimilarExample]:
        candidates = self.retrieve(query_text)
        if not candidates:
            return []
        k = min(k, len(candidates))
        reranked = rerank(
            self.reranker,
            query_text,
            candidates,
            k,
            self.kb.texts,
            fallback_to_retrieval_order=self.config.rerank_fallback,
        )
        return [
            SimilarExample(
                clause_id=r.clause_id,
                text=self.kb.texts[r.clause_id],
                labels=tuple(self.taxonomy.sort_codes(self.kb.labels[r.clause_id])),
                relevance=r.relevance,
            )
            for r in reranked
        ]

    # -- classification ------------------------------------------------------
    def classify_rag(self, task: TaskSpec, query_text: str) -> tuple[frozenset[str], PromptBundle]:
        category_codes = set(task.class_set)
        candidates = [
            c
            for c in self.retrieve(query_text)
            if self.kb.labels.get(c.clause_id, frozenset()) & category_codes
        ]
        if not candidates:
            raise PipelineError(f"no in-category candidates for task {task.name}")
        k = min(self.config.k, len(candidates))
        reranked = rerank(
            self.reranker,
            query_text,
            candidates,
            k,
            self.kb.texts,
            fallback_to_retrieval_order=self.config.rerank_fallback,
        )
        examples = [
            PromptExample(
                r.clause_id,
                self.kb.texts[r.clause_id],
                tuple(sorted(self.kb.labels[r.clause_id] & category_codes)),
            )
            for r in reranked
        ]
        bundle = build_rag_prompt(
            task,
            query_text,
            examples,
            retrieved_p=self.config.p,
            template_dir=self.template_dir,
        )
        result = self.chat.complete(bundle.rendered)
        parsed = parse_labels(result.text, task)
        return parsed.labels, bundle

    # -- scan -----------------------------------------------------------------
    def scan(self, content: str, content_type: str = "html") -> list[ClauseFinding]:
        if content_type == "html":
            chunks = chunk_html(content, min_words=self.config.min_words)
        elif content_type == "text":
            chunks = chunk_text(content, min_words=self.config.min_words)
        else:
            raise ValueError(f"content_type must be 'html' or 'text', got {content_type!r}")
        threshold = (
            self.config.threshold
            if self.config.threshold is not None
            else self.detector.threshold
        )
        scored = [
            (c, s, bool(s > threshold)) for c, s, _ in detect(self.detector, chunks)
        ]
        findings: list[ClauseFinding] = []
        for chunk, score, flagged in scored:
            if not flagged:
                continue
            findings.append(self._classify_chunk(chunk, score))
        return findings

    def _classify_chunk(self, chunk: Chunk, score: float) -> ClauseFinding:
        labels: dict[str, tuple[str, ...]] = {}
        errors: list[dict] = []
        audit: list[dict] = []
        for category in self.config.categories:
            task = task_by_name(f"{category}-classify", self.taxonomy)
            try:
                predicted, bundle = self.classify_rag(task, chunk.text)
            except Exception as exc:
                errors.append({"task": task.name, "error": str(exc)})
                labels[category] = ()
                continue
            labels[category] = tuple(self.taxonomy.sort_codes(predicted))
            if self.config.keep_prompt_audit:
                audit.append(json.loads(bundle.to_json()))
        detail_codes = self.taxonomy.sort_codes(
            {code for codes in labels.values() for code in codes}
        )
        label_details = [
            {
                "code": code,
                "display_name": self.taxonomy.get(code).display_name,
                "category": self.taxonomy.get(code).category,
                "legal_ref_url": self.taxonomy.get(code).legal_ref_url,
                "explanation": self.taxonomy.get(code).explanation,
            }
            for code in detail_codes
        ]
        similar: list[SimilarExample] = []
        if self.config.include_similar:
            try:
                similar = self.similar(chunk.text, self.config.max_similar)
            except Exception as exc:
                errors.append({"task": "similar", "error": str(exc)})
        return ClauseFinding(
            chunk=chunk,
            detection_score=score,
            labels=labels,
            label_details=label_details,
            similar_examples=similar,
            errors=errors,
            prompt_audit=audit if self.config.keep_prompt_audit else None,
        )


# ---------------------------------------------------------------------------
# Majority-vote baseline


def majority_vote(
    kb: KnowledgeBase,
    embedder: EmbeddingProviderLike,
    query_text: str,
    k: int,
    mode: str = "dense",
    label_order: Optional[Sequence[str]] = None,
    p: Optional[int] = None,
) -> frozenset[str]:
    """Retrieval-only classification over the top-k neighbors.

    Predicts every label carried by a strict majority of the retrieved
    examples; when none reaches a majority, predicts the single most
    frequent label (ties resolved by ``label_order``).
    """
    if len(kb.dense) == 0:
        raise PipelineError("empty index")
    query_vec = embedder.embed([query_text])[0]
    if mode == "dense":
        retrieved = dense_search(kb.dense, query_vec, k)
    else:
        dense = dense_search(kb.dense, query_vec, p or max(k, DEFAULT_P))
        sparse = sparse_search(kb.sparse, query_text, p or max(k, DEFAULT_P))
        retrieved = hybrid_merge(dense, sparse)[:k]
    neighbor_labels = [kb.labels.get(c.clause_id, frozenset()) for c in retrieved]
    counts: dict[str, int] = {}
    for labels in neighbor_labels:
        for label in labels:
            counts[label] = counts.get(label, 0) + 1
    if not counts:
        return frozenset()
    n = len(retrieved)
    majority = {label for label, count in counts.items() if count > n / 2}
    if majority:
        return frozenset(majority)
    order = list(label_order) if label_order else sorted(counts)
    rank = {label: i for i, label in enumerate(order)}
    best = max(counts, key=lambda l: (counts[l], -rank.get(l, len(order))))
    return frozenset((best,))
