"""Multi-label metrics, seed aggregation and error decomposition.

Conventions: precision = TP/(TP+FP) and recall = TP/(TP+FN) with the
0/0 case defined as 0 — this matters for macro-F1 on rare labels and is
applied uniformly. Micro-F1 pools TP/FP/FN over all classes first;
macro-F1 is the unweighted mean of per-label F1 over the full class
set, so labels that never occur contribute 0.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence


class MetricsError(ValueError):
    pass


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) else 0.0


@dataclass
class MetricReport:
    macro_f1: float
    micro_f1: float
    per_label_f1: dict[str, float]
    per_label_counts: dict[str, ConfusionCounts] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    macro_std: Optional[float] = None
    micro_std: Optional[float] = None

    def to_json(self) -> str:
        payload = {
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "per_label_f1": self.per_label_f1,
            "per_label_counts": {
                label: {"tp": c.tp, "fp": c.fp, "fn": c.fn}
                for label, c in self.per_label_counts.items()
            },
            "seeds": self.seeds,
            "macro_std": self.macro_std,
            "micro_std": self.micro_std,
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2)


def confusion_counts(
    gold: Sequence[frozenset[str] | set[str]],
    pred: Sequence[frozenset[str] | set[str]],
    class_set: Sequence[str],
) -> dict[str, ConfusionCounts]:
    if len(gold) != len(pred):
        raise MetricsError(f"gold/pred length mismatch: {len(gold)} vs {len(pred)}")
    counts = {label: ConfusionCounts() for label in class_set}
    for g, p in zip(gold, pred):
        for label in class_set:
            in_g, in_p = label in g, label in p
            if in_g and in_p:
                counts[label].tp += 1
            elif in_p:
                counts[label].fp += 1
            elif in_g:
                counts[label].fn += 1
    return counts


def f1_scores(
    gold: Sequence[frozenset[str] | set[str]],
    pred: Sequence[frozenset[str] | set[str]],
    class_set: Sequence[str],
) -> MetricReport:
    counts = confusion_counts(gold, pred, class_set)
    per_label = {label: c.f1 for label, c in counts.items()}
    macro = sum(per_label.values()) / len(class_set) if class_set else 0.0
    pooled = ConfusionCounts(
        tp=sum(c.tp for c in counts.values()),
        fp=sum(c.fp for c in counts.values()),
        fn=sum(c.fn for c in counts.values()),
    )
    return MetricReport(
        macro_f1=macro,
        micro_f1=pooled.f1,
        per_label_f1=per_label,
        per_label_counts=counts,
    )


def summarize_seed_runs(reports: Sequence[MetricReport], seeds: Sequence[int]) -> MetricReport:
    """Mean report over seed repetitions with sample-std dispersion."""
    if not reports:
        raise MetricsError("no reports to summarize")
    labels = list(reports[0].per_label_f1)
    per_label = {
        label: sum(r.per_label_f1[label] for r in reports) / len(reports) for label in labels
    }
    macros = [r.macro_f1 for r in reports]
    micros = [r.micro_f1 for r in reports]
    return MetricReport(
        macro_f1=sum(macros) / len(macros),
        micro_f1=sum(micros) / len(micros),
        per_label_f1=per_label,
        seeds=list(seeds),
        macro_std=statistics.stdev(macros) if len(macros) > 1 else 0.0,
        micro_std=statistics.stdev(micros) if len(micros) > 1 else 0.0,
    )


# ---------------------------------------------------------------------------
# Cross-task aggregation (method ranking)


@dataclass(frozen=True)
class RunScore:
    method: str
    task: str
    seed: int
    macro_f1: float
    micro_f1: float = 0.0


@dataclass
class RankingRow:
    method: str
    mean_macro_f1: float
    combined_std: float
    task_means: dict[str, float]


def aggregate_runs(scores: Iterable[RunScore]) -> list[RankingRow]:
    """Rank methods by the mean of their per-task macro-F1 means.

    The dispersion column is the combined standard deviation
    (1/n)*sqrt(sum of per-task seed variances) over the n tasks.
    """
    by_method: dict[str, dict[str, list[float]]] = {}
    for s in scores:
        by_method.setdefault(s.method, {}).setdefault(s.task, []).append(s.macro_f1)
    rows = []
    for method, tasks in by_method.items():
        task_means = {task: sum(vals) / len(vals) for task, vals in tasks.items()}
        variances = [
            statistics.variance(vals) if len(vals) > 1 else 0.0 for vals in tasks.values()
        ]
        n = len(tasks)
        combined = math.sqrt(sum(variances)) / n
        rows.append(
            RankingRow(
                method=method,
                mean_macro_f1=sum(task_means.values()) / n,
                combined_std=combined,
                task_means=task_means,
            )
        )
    rows.sort(key=lambda r: (-r.mean_macro_f1, r.combined_std, r.method))
    return rows


# ---------------------------------------------------------------------------
# Error decomposition


@dataclass(frozen=True)
class EvalRecord:
    gold: frozenset[str]
    predicted: frozenset[str]
    retrieved_labels: frozenset[str]  # union over the prompt's retrieved examples

    @classmethod
    def make(
        cls,
        gold: Iterable[str],
        predicted: Iterable[str],
        retrieved: Iterable,
    ) -> "EvalRecord":
        retrieved = list(retrieved)
        if retrieved and not isinstance(retrieved[0], str):
            union: set[str] = set()
            for labels in retrieved:
                union.update(labels)
            retrieved = union
        return cls(frozenset(gold), frozenset(predicted), frozenset(retrieved))


@dataclass
class ErrorDecomposition:
    fn_total: int
    retrieval_errors: int
    generation_errors: int
    gen_ret_ratio: Optional[float]
    confusion_pairs: list[tuple[str, str, int]]
    support_f1_pearson_r: Optional[float]


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    if len(xs) != len(ys) or len(xs) < 2:
        return None
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = sum((x - mx) ** 2 for x in xs)
    vy = sum((y - my) ** 2 for y in ys)
    if vx == 0.0 or vy == 0.0:
        return None
    return cov / math.sqrt(vx * vy)


def error_decomposition(
    records: Sequence[EvalRecord],
    class_set: Sequence[str],
) -> ErrorDecomposition:
    """Split false negatives into retrieval vs generation errors.

    A missed gold label is a retrieval error when it appears in no
    retrieved example's label set, and a generation error when the
    evidence was retrieved but the model still failed to predict it.
    Confusion pairs are counted only on substitution instances (at
    least one FN and one FP in the same instance).
    """
    retrieval = generation = 0
    pair_counts: dict[tuple[str, str], int] = {}
    for record in records:
        fns = record.gold - record.predicted
        fps = record.predicted - record.gold
        for label in fns:
            if label in record.retrieved_labels:
                generation += 1
            else:
                retrieval += 1
        if fns and fps:
            for g in fns:
                for p in fps:
                    pair_counts[(g, p)] = pair_counts.get((g, p), 0) + 1
    fn_total = retrieval + generation
    ratio = generation / retrieval if retrieval > 0 else None

    report = f1_scores(
        [r.gold for r in records], [r.predicted for r in records], class_set
    )
    supports = {
        label: sum(1 for r in records if label in r.gold) for label in class_set
    }
    with_support = [label for label in class_set if supports[label] > 0]
    r_value = pearson_r(
        [float(supports[label]) for label in with_support],
        [report.per_label_f1[label] for label in with_support],
    )
    pairs = sorted(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ErrorDecomposition(
        fn_total=fn_total,
        retrieval_errors=retrieval,
        generation_errors=generation,
        gen_ret_ratio=ratio,
        confusion_pairs=[(g, p, c) for (g, p), c in pairs],
        support_f1_pearson_r=r_value,
    )


# ---------------------------------------------------------------------------
# Delimited report emitters


def format_mean_std(mean: float, std: Optional[float]) -> str:
    if std is None:
        return f"{mean:.2f}"
    return f"{mean:.2f} ± {std:.2f}"


def results_table_csv(
    reports: dict[str, dict[str, MetricReport]],
    tasks: Sequence[str],
) -> str:
    """CSV with one method per row and per-task macro/micro columns,
    cells formatted as mean ± std."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    header = ["method"]
    for task in tasks:
        header += [f"{task}_macro_f1", f"{task}_micro_f1"]
    writer.writerow(header)
    for method in sorted(reports):
        row = [method]
        for task in tasks:
            report = reports[method].get(task)
            if report is None:
                row += ["", ""]
            else:
                row += [
                    format_mean_std(report.macro_f1, report.macro_std),
                    format_mean_std(report.micro_f1, report.micro_std),
                ]
        writer.writerow(row)
    return buf.getvalue()
