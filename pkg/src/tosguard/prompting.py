"""Prompt construction in pattern-completion format, and completion parsing.

Prompts are a sequence of ``Cláusula: [text]`` / ``Etiqueta: [labels]``
blocks ending with a dangling ``Etiqueta:`` hook that triggers the
model to complete the label. Scaffold and instruction text live in
versioned template files ({{instruction}}, {{examples}}, {{query}}
slots) so experiments stay reproducible.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .corpus import Clause, Target, TaskSpec, target_labels

CLAUSE_MARK = "Cláusula:"
LABEL_MARK = "Etiqueta:"

_DETECTION_ALIASES = {
    "ok": "ok",
    "okay": "ok",
    "no abusiva": "ok",
    "abusive": "abusive",
    "abusiva": "abusive",
}


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class PromptExample:
    clause_id: str
    text: str
    labels: tuple[str, ...]


@dataclass
class PromptBundle:
    task: str
    instruction: str
    examples: list[PromptExample]
    query_text: str
    rendered: str
    provenance: dict
    shuffle_seed: Optional[int] = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "task": self.task,
                "instruction": self.instruction,
                "examples": [
                    {"clause_id": e.clause_id, "text": e.text, "labels": list(e.labels)}
                    for e in self.examples
                ],
                "query_text": self.query_text,
                "rendered": self.rendered,
                "provenance": self.provenance,
                "shuffle_seed": self.shuffle_seed,
            },
            ensure_ascii=False,
            sort_keys=True,
        )


@dataclass
class ParsedPrediction:
    labels: frozenset[str]
    raw: str
    warnings: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Templates


def _default_template_dir() -> Path:
    return Path(str(resources.files("tosguard") / "templates" / "v1"))


def load_template(name: str, template_dir: Optional[str | Path] = None) -> str:
    directory = Path(template_dir) if template_dir else _default_template_dir()
    return (directory / name).read_text(encoding="utf-8")


def default_instruction(task: TaskSpec, template_dir: Optional[str | Path] = None) -> str:
    if task.kind == "detection":
        return load_template("instruction_detection.txt", template_dir)
    text = load_template("instruction_classification.txt", template_dir)
    return text.replace("{{labels}}", ", ".join(task.class_set))


# ---------------------------------------------------------------------------
# Few-shot example selection


def spaced_indices(n: int, k: int) -> list[int]:
    """Evenly spaced positions into a length-sorted candidate list.

    K=1 picks the median; otherwise floor(i*(n-1)/(K-1)) for i in 0..K-1.
    """
    if k < 1 or n < k:
        raise PromptError(f"cannot pick {k} spaced samples from {n} candidates")
    if k == 1:
        return [(n - 1) // 2]
    return [i * (n - 1) // (k - 1) for i in range(k)]


def build_fewshot(
    train_pool: Sequence[tuple[Clause, Target]],
    task: TaskSpec,
    k: int,
    seed: int,
) -> list[PromptExample]:
    """K examples per class, spaced by text length, then shuffled.

    Candidates are sorted by length ascending so the picks span short
    through long phrasings of each label; the final shuffle counters
    recency bias in the prompt.
    """
    examples: list[PromptExample] = []
    for cls in task.class_set:
        candidates = [
            (clause, target)
            for clause, target in train_pool
            if cls in target_labels(target)
        ]
        if len(candidates) < k:
            raise PromptError(
                f"class {cls!r} has only {len(candidates)} candidates, need {k}"
            )
        candidates.sort(key=lambda item: len(item[0].text))
        for idx in spaced_indices(len(candidates), k):
            clause, target = candidates[idx]
            examples.append(
                PromptExample(clause.id, clause.text, _ordered(target_labels(target), task))
            )
    random.Random(seed).shuffle(examples)
    return examples


def _ordered(labels: frozenset[str], task: TaskSpec) -> tuple[str, ...]:
    return tuple(l for l in task.class_set if l in labels)


# ---------------------------------------------------------------------------
# Rendering


def render_prompt(
    instruction: str,
    examples: Sequence[PromptExample],
    query_text: str,
    template_dir: Optional[str | Path] = None,
) -> str:
    blocks = "".join(
        f"{CLAUSE_MARK} {e.text}\n{LABEL_MARK} {', '.join(e.labels)}\n\n" for e in examples
    )
    template = load_template("prompt.txt", template_dir)
    rendered = (
        template.replace("{{instruction}}", instruction)
        .replace("{{examples}}", blocks)
        .replace("{{query}}", query_text)
    )
    assert rendered.endswith(LABEL_MARK)
    return rendered


def build_fewshot_prompt(
    task: TaskSpec,
    query_text: str,
    train_pool: Sequence[tuple[Clause, Target]],
    k: int,
    seed: int,
    instruction: Optional[str] = None,
    template_dir: Optional[str | Path] = None,
) -> PromptBundle:
    instruction = instruction or default_instruction(task, template_dir)
    examples = build_fewshot(train_pool, task, k, seed)
    rendered = render_prompt(instruction, examples, query_text, template_dir)
    return PromptBundle(
        task=task.name,
        instruction=instruction,
        examples=examples,
        query_text=query_text,
        rendered=rendered,
        provenance={
            "mode": "few_shot",
            "shots_per_class": k,
            "example_ids": [e.clause_id for e in examples],
        },
        shuffle_seed=seed,
    )


def build_rag_prompt(
    task: TaskSpec,
    query_text: str,
    examples: Sequence[PromptExample],
    instruction: Optional[str] = None,
    retrieved_p: Optional[int] = None,
    allow_empty: bool = False,
    template_dir: Optional[str | Path] = None,
) -> PromptBundle:
    """RAG prompt over reranked examples, kept in relevance order.

    Unlike few-shot prompts there is no reshuffle: relevance order is
    informative. An empty example list is allowed only for explicit
    zero-shot runs.
    """
    if not examples and not allow_empty:
        raise PromptError("RAG prompt requires at least one example (or allow_empty)")
    instruction = instruction or default_instruction(task, template_dir)
    examples = [
        PromptExample(e.clause_id, e.text, _ordered(frozenset(e.labels), task))
        for e in examples
    ]
    rendered = render_prompt(instruction, examples, query_text, template_dir)
    return PromptBundle(
        task=task.name,
        instruction=instruction,
        examples=list(examples),
        query_text=query_text,
        rendered=rendered,
        provenance={
            "mode": "rag",
            "p": retrieved_p,
            "k": len(examples),
            "example_ids": [e.clause_id for e in examples],
        },
    )


# ---------------------------------------------------------------------------
# Completion parsing

_SEGMENT_SPLIT_RE = re.compile(r"[,;\n]+")
_EDGE_PUNCT_RE = re.compile(r"^\W+|\W+$", re.UNICODE)


def _normalize(text: str) -> str:
    text = text.casefold().replace("_", " ")
    text = re.sub(r"\s+", " ", text).strip()
    return _EDGE_PUNCT_RE.sub("", text)


def _alias_table(task: TaskSpec) -> dict[str, str]:
    aliases: dict[str, str] = {}
    for code in task.class_set:
        aliases[_normalize(code)] = code
    if task.kind == "detection":
        for alias, code in _DETECTION_ALIASES.items():
            if code in task.class_set:
                aliases[_normalize(alias)] = code
    return aliases


def parse_labels(completion: str, task: TaskSpec) -> ParsedPrediction:
    """Parse an LLM completion into a label set.

    Takes the text after the last ``Etiqueta:`` when present, splits on
    commas/semicolons/newlines, normalizes (casefold, collapse
    whitespace, underscores as spaces) and matches against the task's
    class set. Segments matching nothing become warnings; an empty
    result is a valid, scored-as-wrong outcome.
    """
    aliases = _alias_table(task)
    matches = list(re.finditer(re.escape(LABEL_MARK), completion, re.IGNORECASE))
    tail = completion[matches[-1].end() :] if matches else completion
    found: list[str] = []
    warnings: list[str] = []
    for segment in _SEGMENT_SPLIT_RE.split(tail):
        norm = _normalize(segment)
        if not norm:
            continue
        hits = _match_segment(norm, aliases)
        if hits:
            found.extend(hits)
        else:
            warnings.append(segment.strip())
    ordered = {code for code in found}
    return ParsedPrediction(labels=frozenset(ordered), raw=completion, warnings=warnings)


def _match_segment(norm: str, aliases: dict[str, str]) -> list[str]:
    if norm in aliases:
        return [aliases[norm]]
    if ":" in norm:
        after = _normalize(norm.rsplit(":", 1)[1])
        if after in aliases:
            return [aliases[after]]
    # word-window scan, longest alias first, for codes embedded in prose
    words = [_EDGE_PUNCT_RE.sub("", w) for w in norm.split(" ")]
    alias_words = sorted(
        ((a.split(" "), code) for a, code in aliases.items()),
        key=lambda item: -len(item[0]),
    )
    hits: list[str] = []
    i = 0
    while i < len(words):
        for alias, code in alias_words:
            if words[i : i + len(alias)] == alias:
                hits.append(code)
                i += len(alias)
                break
        else:
            i += 1
    return hits
