"""Linear detection filter: TF-IDF features + max-margin classifier.

This is the cheap first stage of the scan pipeline. It is intentionally
a small linear model; anything flagged here is re-examined by the
classification stage, so the filter is tuned for recall.

Model file format (JSON): {"vocab": {...}, "weights": [...], "bias": f,
"threshold": f, "config": {...}}.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .textutil import tokenize

ABUSIVE = "abusive"
OK = "ok"

DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)


class DetectorError(ValueError):
    pass


def _ngrams(tokens: list[str], ngram_range: tuple[int, int]) -> list[str]:
    lo, hi = ngram_range
    out: list[str] = []
    for n in range(lo, hi + 1):
        if n == 1:
            out.extend(tokens)
        else:
            out.extend(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    return out


@dataclass
class TfidfVocabulary:
    """Term index with smoothed idf weights.

    idf(t) = ln((N + 1) / (df + 1)) + 1; transformed vectors are
    L2-normalized.
    """

    term_index: dict[str, int]
    idf: np.ndarray
    document_count: int
    ngram_range: tuple[int, int] = (1, 1)
    min_df: int = 1

    def __len__(self) -> int:
        return len(self.term_index)

    def transform(self, texts: Sequence[str]) -> np.ndarray:
        matrix = np.zeros((len(texts), len(self.term_index)), dtype=np.float64)
        for row, text in enumerate(texts):
            for term in _ngrams(tokenize(text), self.ngram_range):
                col = self.term_index.get(term)
                if col is not None:
                    matrix[row, col] += 1.0
        matrix *= self.idf
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return matrix / norms


def fit_tfidf(
    texts: Sequence[str],
    ngram_range: tuple[int, int] = (1, 1),
    min_df: int = 1,
) -> TfidfVocabulary:
    if not texts:
        raise DetectorError("cannot fit tf-idf on an empty corpus")
    df: dict[str, int] = {}
    for text in texts:
        for term in set(_ngrams(tokenize(text), ngram_range)):
            df[term] = df.get(term, 0) + 1
    terms = sorted(t for t, d in df.items() if d >= min_df)
    term_index = {t: i for i, t in enumerate(terms)}
    n = len(texts)
    idf = np.array(
        [math.log((n + 1) / (df[t] + 1)) + 1.0 for t in terms], dtype=np.float64
    )
    return TfidfVocabulary(term_index, idf, n, ngram_range, min_df)


@dataclass
class LinearDetector:
    vocab: TfidfVocabulary
    weights: np.ndarray
    bias: float
    threshold: float = 0.0
    config: dict = field(default_factory=dict)

    def scores(self, texts: Sequence[str]) -> np.ndarray:
        return self.vocab.transform(texts) @ self.weights + self.bias

    def save(self, path: str | Path) -> None:
        payload = {
            "vocab": {
                "terms": list(self.vocab.term_index),
                "idf": self.vocab.idf.tolist(),
                "document_count": self.vocab.document_count,
                "ngram_range": list(self.vocab.ngram_range),
                "min_df": self.vocab.min_df,
            },
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "threshold": self.threshold,
            "config": self.config,
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LinearDetector":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        v = payload["vocab"]
        vocab = TfidfVocabulary(
            term_index={t: i for i, t in enumerate(v["terms"])},
            idf=np.asarray(v["idf"], dtype=np.float64),
            document_count=v["document_count"],
            ngram_range=tuple(v["ngram_range"]),
            min_df=v["min_df"],
        )
        return cls(
            vocab=vocab,
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=payload["bias"],
            threshold=payload["threshold"],
            config=payload.get("config", {}),
        )


def _sgd_hinge(
    features: np.ndarray,
    targets: np.ndarray,
    c: float,
    epochs: int,
    seed: int,
) -> tuple[np.ndarray, float]:
    """Pegasos-style subgradient descent on hinge loss with L2 penalty.

    lambda = 1 / (C * n); learning rate 1 / (lambda * t). The bias is
    trained as an extra constant feature so it shrinks with the weights.
    Deterministic for a given seed.
    """
    n, dim = features.shape
    lam = 1.0 / (c * n)
    augmented = np.hstack([features, np.ones((n, 1))])
    w = np.zeros(dim + 1, dtype=np.float64)
    rng = random.Random(seed)
    order = list(range(n))
    t = 0
    for _ in range(epochs):
        rng.shuffle(order)
        for i in order:
            t += 1
            eta = 1.0 / (lam * t)
            margin = targets[i] * (augmented[i] @ w)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * targets[i] * augmented[i]
    return w[:-1], float(w[-1])


def train_detector(
    dataset: Sequence[tuple[str, str]],
    c: float = 1.0,
    epochs: int = 10,
    seed: int = 0,
    ngram_range: tuple[int, int] = (1, 2),
    min_df: int = 2,
    threshold: float = 0.0,
) -> LinearDetector:
    """Train the binary filter on (text, "ok"|"abusive") pairs."""
    labels = {label for _, label in dataset}
    if labels != {OK, ABUSIVE}:
        raise DetectorError(f"need both classes {OK!r} and {ABUSIVE!r}, got {sorted(labels)}")
    texts = [text for text, _ in dataset]
    targets = np.array([1.0 if label == ABUSIVE else -1.0 for _, label in dataset])
    vocab = fit_tfidf(texts, ngram_range=ngram_range, min_df=min_df)
    features = vocab.transform(texts)
    weights, bias = _sgd_hinge(features, targets, c, epochs, seed)
    config = {
        "c": c,
        "epochs": epochs,
        "seed": seed,
        "ngram_range": list(ngram_range),
        "min_df": min_df,
    }
    return LinearDetector(vocab, weights, bias, threshold, config)


def cross_validate_c(
    dataset: Sequence[tuple[str, str]],
    c_grid: Iterable[float] = DEFAULT_C_GRID,
    folds: int = 10,
    epochs: int = 10,
    seed: int = 0,
) -> tuple[float, dict[float, float]]:
    """k-fold search over the regularization grid; returns (best C, mean
    abusive-F1 per C)."""
    items = list(dataset)
    rng = random.Random(seed)
    indices = list(range(len(items)))
    rng.shuffle(indices)
    folds = min(folds, len(items))
    fold_of = {idx: i % folds for i, idx in enumerate(indices)}
    results: dict[float, float] = {}
    for c in c_grid:
        f1s = []
        for fold in range(folds):
            train = [items[i] for i in range(len(items)) if fold_of[i] != fold]
            test = [items[i] for i in range(len(items)) if fold_of[i] == fold]
            train_labels = {label for _, label in train}
            if len(train_labels) < 2 or not test:
                continue
            model = train_detector(train, c=c, epochs=epochs, seed=seed)
            scores = model.scores([t for t, _ in test])
            tp = fp = fn = 0
            for (_, gold), score in zip(test, scores):
                predicted = score > model.threshold
                if predicted and gold == ABUSIVE:
                    tp += 1
                elif predicted:
                    fp += 1
                elif gold == ABUSIVE:
                    fn += 1
            denom = 2 * tp + fp + fn
            f1s.append(2 * tp / denom if denom else 0.0)
        results[c] = sum(f1s) / len(f1s) if f1s else 0.0
    best = max(results, key=lambda k: (results[k], -k))
    return best, results


def detect(detector: LinearDetector, chunks: Sequence) -> list[tuple[object, float, bool]]:
    """Score chunks, flagging those with score > threshold. Accepts
    Chunk objects or plain strings; order is preserved."""
    if not chunks:
        return []
    texts = [c if isinstance(c, str) else c.text for c in chunks]
    scores = detector.scores(texts)
    return [
        (chunk, float(score), bool(score > detector.threshold))
        for chunk, score in zip(chunks, scores)
    ]
