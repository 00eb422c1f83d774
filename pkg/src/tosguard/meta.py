"""Random-effects meta-analysis over (configuration x task x seed) scores.

Pools a configuration's per-task scores with DerSimonian-Laird
between-task variance and inverse-variance weights 1/(sigma^2_e + tau^2),
then ranks configurations by the composite of the pooled macro- and
micro-F1. Within-task variance is the variance of the seed mean
(sample variance over seeds divided by the seed count).
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

_Z95 = 1.96
_VAR_FLOOR = 1e-12  # keeps weights finite when seeds agree exactly

METRICS = ("macro_f1", "micro_f1")


class MetaAnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class RunObservation:
    config_id: str
    task_id: str
    seed: int
    macro_f1: float
    micro_f1: float


@dataclass
class MetaMetric:
    pooled_mean: float
    tau2: float
    se: float
    ci_low: float
    ci_high: float
    hetero_ci_low: float
    hetero_ci_high: float
    task_means: dict[str, float]


@dataclass
class MetaResult:
    config_id: str
    macro: MetaMetric
    micro: MetaMetric

    @property
    def composite(self) -> float:
        return self.macro.pooled_mean + self.micro.pooled_mean


def _task_summaries(
    observations: Sequence[RunObservation], metric: str
) -> tuple[list[str], list[float], list[float]]:
    by_task: dict[str, list[float]] = {}
    for obs in observations:
        by_task.setdefault(obs.task_id, []).append(getattr(obs, metric))
    tasks = sorted(by_task)
    if len(tasks) < 2:
        raise MetaAnalysisError(f"need >= 2 tasks, got {len(tasks)}")
    means: list[float] = []
    variances: list[float] = []
    for task in tasks:
        values = by_task[task]
        if len(values) < 2:
            raise MetaAnalysisError(
                f"task {task!r} has {len(values)} seed runs; need >= 2 for within-task variance"
            )
        means.append(sum(values) / len(values))
        variances.append(max(statistics.variance(values) / len(values), _VAR_FLOOR))
    return tasks, means, variances


def dl_tau2(means: Sequence[float], variances: Sequence[float]) -> float:
    """DerSimonian-Laird between-task variance, clamped at 0."""
    w = [1.0 / v for v in variances]
    sum_w = sum(w)
    fixed_mean = sum(wi * y for wi, y in zip(w, means)) / sum_w
    q = sum(wi * (y - fixed_mean) ** 2 for wi, y in zip(w, means))
    c = sum_w - sum(wi * wi for wi in w) / sum_w
    e = len(means)
    if c <= 0.0:
        return 0.0
    return max(0.0, (q - (e - 1)) / c)


def pooled_mean(
    means: Sequence[float], variances: Sequence[float], tau2: float
) -> tuple[float, float]:
    """Random-effects pooled mean and its standard error for a given tau^2."""
    weights = [1.0 / (v + tau2) for v in variances]
    total = sum(weights)
    mu = sum(wi * y for wi, y in zip(weights, means)) / total
    return mu, (1.0 / total) ** 0.5


def random_effects(observations: Sequence[RunObservation], metric: str) -> MetaMetric:
    """DerSimonian-Laird random-effects pooling for one configuration.

    Emits two interval forms: the standard-error CI mu +/- 1.96*se and
    a heterogeneity interval mu +/- 1.96*sqrt(tau^2 + se^2); the latter
    widens with between-task spread rather than shrinking with tasks.
    """
    if metric not in METRICS:
        raise MetaAnalysisError(f"metric must be one of {METRICS}, got {metric!r}")
    tasks, means, variances = _task_summaries(observations, metric)
    tau2 = dl_tau2(means, variances)
    mu, se = pooled_mean(means, variances, tau2)
    hetero = (tau2 + se * se) ** 0.5
    return MetaMetric(
        pooled_mean=mu,
        tau2=tau2,
        se=se,
        ci_low=mu - _Z95 * se,
        ci_high=mu + _Z95 * se,
        hetero_ci_low=mu - _Z95 * hetero,
        hetero_ci_high=mu + _Z95 * hetero,
        task_means=dict(zip(tasks, means)),
    )


def rank_configs(observations: Iterable[RunObservation]) -> list[MetaResult]:
    """Rank configurations by composite pooled macro+micro F1.

    Every configuration must cover the same task set; ties break toward
    the lower macro tau^2, then the config id.
    """
    by_config: dict[str, list[RunObservation]] = {}
    for obs in observations:
        by_config.setdefault(obs.config_id, []).append(obs)
    if not by_config:
        raise MetaAnalysisError("no observations")
    all_tasks = sorted({obs.task_id for rows in by_config.values() for obs in rows})
    missing: list[tuple[str, str]] = []
    for config_id, rows in by_config.items():
        have = {obs.task_id for obs in rows}
        missing.extend((config_id, task) for task in all_tasks if task not in have)
    if missing:
        raise MetaAnalysisError(f"uneven task coverage; missing cells: {missing}")
    results = [
        MetaResult(
            config_id=config_id,
            macro=random_effects(rows, "macro_f1"),
            micro=random_effects(rows, "micro_f1"),
        )
        for config_id, rows in by_config.items()
    ]
    results.sort(key=lambda r: (-r.composite, r.macro.tau2, r.config_id))
    return results


# ---------------------------------------------------------------------------
# Delimited IO


def read_observations_csv(text: str) -> list[RunObservation]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for row in reader:
        out.append(
            RunObservation(
                config_id=row["config_id"],
                task_id=row["task_id"],
                seed=int(row["seed"]),
                macro_f1=float(row["macro_f1"]),
                micro_f1=float(row["micro_f1"]),
            )
        )
    return out


def ranking_table_csv(results: Sequence[MetaResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        [
            "config_id",
            "re_macro_f1",
            "macro_ci_low",
            "macro_ci_high",
            "re_micro_f1",
            "micro_ci_low",
            "micro_ci_high",
            "tau2_macro",
            "tau2_micro",
            "composite",
        ]
    )
    for r in results:
        writer.writerow(
            [
                r.config_id,
                f"{r.macro.pooled_mean:.4f}",
                f"{r.macro.ci_low:.4f}",
                f"{r.macro.ci_high:.4f}",
                f"{r.micro.pooled_mean:.4f}",
                f"{r.micro.ci_low:.4f}",
                f"{r.micro.ci_high:.4f}",
                f"{r.macro.tau2:.4f}",
                f"{r.micro.tau2:.4f}",
                f"{r.composite:.4f}",
            ]
        )
    return buf.getvalue()
