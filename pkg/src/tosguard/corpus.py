"""Corpus data model, JSONL persistence, task derivation and splits.

The corpus format is JSONL with one clause record per line:

    {"id": str, "contract_id": str, "company": str, "text": str, "labels": [str]}

Splits are stored as JSON:

    {"task": str, "seed": int, "train": [ids], "val": [ids], "test": [ids]}
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .taxonomy import CATEGORIES, Taxonomy
from .textutil import tokenize, word_count

Tokenizer = Callable[[str], list[str]]

DETECTION_OK = "ok"
DETECTION_ABUSIVE = "abusive"

TASK_NAMES = (
    "joint-detect",
    "illegal-detect",
    "dark-detect",
    "gray-detect",
    "illegal-classify",
    "dark-classify",
    "gray-classify",
)

PARTITIONS = ("train", "val", "test")


class CorpusFormatError(ValueError):
    """Raised for malformed corpus files or records."""


@dataclass(frozen=True)
class Clause:
    id: str
    contract_id: str
    text: str
    labels: frozenset[str]
    word_count: int
    token_count: int

    @classmethod
    def make(
        cls,
        id: str,
        contract_id: str,
        text: str,
        labels: Iterable[str] = (),
        tokenizer: Tokenizer = tokenize,
    ) -> "Clause":
        return cls(
            id=id,
            contract_id=contract_id,
            text=text,
            labels=frozenset(labels),
            word_count=word_count(text),
            token_count=len(tokenizer(text)),
        )


@dataclass
class Contract:
    id: str
    company_name: str
    clauses: list[Clause] = field(default_factory=list)
    source_url: Optional[str] = None

    def clause_ids(self) -> list[str]:
        return [c.id for c in self.clauses]


@dataclass(frozen=True)
class TaskSpec:
    """A registered detection or classification task.

    Detection tasks are binary over {ok, abusive}; classification tasks
    carry their category's label codes in taxonomy registration order.
    """

    name: str
    kind: str  # "detection" | "classification"
    class_set: tuple[str, ...]
    category: Optional[str] = None  # None only for joint-detect


def task_by_name(name: str, taxonomy: Taxonomy) -> TaskSpec:
    if name not in TASK_NAMES:
        raise ValueError(f"unknown task {name!r}; expected one of {TASK_NAMES}")
    if name == "joint-detect":
        return TaskSpec(name, "detection", (DETECTION_OK, DETECTION_ABUSIVE))
    category, kind = name.split("-", 1)
    assert category in CATEGORIES
    if kind == "detect":
        return TaskSpec(name, "detection", (DETECTION_OK, DETECTION_ABUSIVE), category)
    return TaskSpec(name, "classification", tuple(taxonomy.by_category(category)), category)


def all_tasks(taxonomy: Taxonomy) -> list[TaskSpec]:
    return [task_by_name(n, taxonomy) for n in TASK_NAMES]


# ---------------------------------------------------------------------------
# Persistence


def load_corpus(
    path: str | Path,
    taxonomy: Optional[Taxonomy] = None,
    tokenizer: Tokenizer = tokenize,
) -> list[Contract]:
    """Load contracts from a JSONL clause file.

    Clause order within a contract follows file order; contracts are
    returned in order of first appearance. Unknown label codes and
    duplicate clause ids are rejected.
    """
    taxonomy = taxonomy or Taxonomy.default()
    contracts: dict[str, Contract] = {}
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}: malformed JSON on line {lineno}: {exc}") from exc
            try:
                clause_id = record["id"]
                contract_id = record["contract_id"]
                company = record["company"]
                text = record["text"]
                labels = record["labels"]
            except KeyError as exc:
                raise CorpusFormatError(f"{path}: line {lineno} missing field {exc}") from exc
            if clause_id in seen_ids:
                raise CorpusFormatError(
                    f"{path}: duplicate clause id {clause_id!r} on line {lineno}"
                )
            seen_ids.add(clause_id)
            for code in labels:
                if code not in taxonomy:
                    raise CorpusFormatError(
                        f"{path}: unknown label code {code!r} on line {lineno}"
                    )
            clause = Clause.make(clause_id, contract_id, text, labels, tokenizer)
            contract = contracts.get(contract_id)
            if contract is None:
                contract = Contract(
                    id=contract_id,
                    company_name=company,
                    source_url=record.get("source_url"),
                )
                contracts[contract_id] = contract
            contract.clauses.append(clause)
    return list(contracts.values())


def save_corpus(contracts: Sequence[Contract], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for contract in contracts:
            for clause in contract.clauses:
                record = {
                    "id": clause.id,
                    "contract_id": contract.id,
                    "company": contract.company_name,
                    "text": clause.text,
                    "labels": sorted(clause.labels),
                }
                if contract.source_url:
                    record["source_url"] = contract.source_url
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def all_clauses(contracts: Sequence[Contract]) -> list[Clause]:
    return [clause for contract in contracts for clause in contract.clauses]


# ---------------------------------------------------------------------------
# Task datasets

Target = Union[str, frozenset[str]]


def derive_task_dataset(
    contracts: Sequence[Contract],
    task: TaskSpec,
    taxonomy: Optional[Taxonomy] = None,
) -> list[tuple[Clause, Target]]:
    """Project the corpus onto a task.

    Detection targets are ``"ok"``/``"abusive"`` (a clause counts as
    abusive for a category task only if it carries a label of that
    category, regardless of labels from other categories). Category
    classification keeps only clauses with at least one in-category
    label; the target is that label subset.
    """
    taxonomy = taxonomy or Taxonomy.default()
    dataset: list[tuple[Clause, Target]] = []
    if task.kind == "detection":
        for clause in all_clauses(contracts):
            if task.category is None:
                abusive = bool(clause.labels)
            else:
                category_codes = set(taxonomy.by_category(task.category))
                abusive = bool(clause.labels & category_codes)
            dataset.append((clause, DETECTION_ABUSIVE if abusive else DETECTION_OK))
        return dataset
    category_codes = set(taxonomy.by_category(task.category or ""))
    for clause in all_clauses(contracts):
        subset = clause.labels & category_codes
        if subset:
            dataset.append((clause, frozenset(subset)))
    return dataset


def target_labels(target: Target) -> frozenset[str]:
    if isinstance(target, str):
        return frozenset((target,))
    return frozenset(target)


# ---------------------------------------------------------------------------
# Stratified splits


@dataclass
class SplitAssignment:
    task: str
    partition: dict[str, str]  # clause_id -> "train" | "val" | "test"
    seed: int

    def ids(self, part: str) -> list[str]:
        return [cid for cid, p in self.partition.items() if p == part]

    def to_json(self) -> str:
        payload = {"task": self.task, "seed": self.seed}
        for part in PARTITIONS:
            payload[part] = self.ids(part)
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SplitAssignment":
        payload = json.loads(text)
        partition: dict[str, str] = {}
        for part in PARTITIONS:
            for cid in payload[part]:
                partition[cid] = part
        return cls(task=payload["task"], partition=partition, seed=payload["seed"])


def stratified_split(
    dataset: Sequence[tuple[Clause, Target]],
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2),
    seed: int = 0,
    task_name: str = "",
) -> SplitAssignment:
    """Iterative stratification for multi-label data.

    Repeatedly takes the label with the fewest unassigned examples and
    places each of its examples into the partition with the greatest
    remaining desired share for that label; ties fall back to greatest
    overall remaining capacity, then to a seeded random choice.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    rng = random.Random(seed)
    n_parts = len(PARTITIONS)

    ids = [clause.id for clause, _ in dataset]
    labelsets = [target_labels(target) for _, target in dataset]
    desired_total = [r * len(dataset) for r in ratios]
    pools: dict[str, set[int]] = {}
    for idx, labels in enumerate(labelsets):
        for label in labels:
            pools.setdefault(label, set()).add(idx)
    desired_label = {
        label: [r * len(pool) for r in ratios] for label, pool in pools.items()
    }

    assignment: dict[str, str] = {}

    def place(idx: int, scores: list[float]) -> None:
        best = max(scores)
        candidates = [j for j in range(n_parts) if scores[j] == best]
        if len(candidates) > 1:
            best_cap = max(desired_total[j] for j in candidates)
            candidates = [j for j in candidates if desired_total[j] == best_cap]
        j = candidates[0] if len(candidates) == 1 else rng.choice(candidates)
        assignment[ids[idx]] = PARTITIONS[j]
        desired_total[j] -= 1
        for label in labelsets[idx]:
            desired_label[label][j] -= 1
            pools[label].discard(idx)

    while True:
        active = [(label, pool) for label, pool in pools.items() if pool]
        if not active:
            break
        label, pool = min(active, key=lambda item: (len(item[1]), item[0]))
        for idx in sorted(pool):
            place(idx, desired_label[label])

    for idx in range(len(dataset)):  # unlabeled leftovers, by capacity
        if ids[idx] not in assignment:
            place(idx, desired_total)

    return SplitAssignment(task=task_name, partition=assignment, seed=seed)


# ---------------------------------------------------------------------------
# Label statistics


def cooccurrence_matrix(
    dataset: Sequence[tuple[Clause, Target]],
    class_set: Sequence[str],
) -> np.ndarray:
    """Symmetric label co-occurrence counts over a classification dataset.

    Diagonal entries are per-label totals; entry [a][b] counts clauses
    carrying both labels.
    """
    index = {label: i for i, label in enumerate(class_set)}
    matrix = np.zeros((len(class_set), len(class_set)), dtype=np.int64)
    for _, target in dataset:
        labels = [l for l in target_labels(target) if l in index]
        for a in labels:
            matrix[index[a]][index[a]] += 1
            for b in labels:
                if a != b:
                    matrix[index[a]][index[b]] += 1
    return matrix
