"""Operator CLI: every pipeline stage and experiment as a subcommand.

Machine-readable outputs (JSON/CSV) go to files or stdout; logs go to
stderr. Exit codes: 0 success, 1 validation error, 2 runtime error.
All randomness is seeded via --seed. Report subcommands can render
matplotlib figures next to their delimited outputs via --figures-dir.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .corpus import (
    SplitAssignment,
    all_clauses,
    cooccurrence_matrix,
    derive_task_dataset,
    load_corpus,
    stratified_split,
    target_labels,
    task_by_name,
    TASK_NAMES,
)
from .detector import LinearDetector, cross_validate_c, train_detector
from .metrics import (
    EvalRecord,
    error_decomposition,
    f1_scores,
    results_table_csv,
    summarize_seed_runs,
)
from .meta import rank_configs, ranking_table_csv, read_observations_csv
from .pipeline import Engine, KnowledgeBase, ScanConfig, findings_to_json, majority_vote
from .prompting import build_fewshot_prompt, build_rag_prompt, parse_labels, PromptExample
from .providers import providers_from_config
from .retrieval import dense_search, hybrid_merge, rerank, sparse_search
from .taxonomy import CATEGORIES, Taxonomy

log = logging.getLogger("tosguard")


class CliError(Exception):
    """Validation problem; exits with code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"path does not exist: {path}")
    return p


def _ratios(text: str) -> tuple[float, float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise CliError(f"--ratios needs three comma-separated values, got {text!r}")
    return tuple(parts)  # type: ignore[return-value]


def _taxonomy(args) -> Taxonomy:
    if getattr(args, "taxonomy", None):
        return Taxonomy.from_json(_existing(args.taxonomy))
    return Taxonomy.default()


def _providers(args):
    if getattr(args, "providers", None):
        config = json.loads(_existing(args.providers).read_text(encoding="utf-8"))
    else:
        log.warning("no --providers config given; using deterministic stubs")
        config = {}
    return providers_from_config(config)


def _write_or_stdout(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_split(args) -> int:
    taxonomy = _taxonomy(args)
    task = task_by_name(args.task, taxonomy)
    contracts = load_corpus(_existing(args.corpus), taxonomy)
    dataset = derive_task_dataset(contracts, task, taxonomy)
    split = stratified_split(dataset, _ratios(args.ratios), args.seed, task.name)
    _write_or_stdout(split.to_json(), args.out)
    if args.figures_dir and task.kind == "classification":
        from .plots import save_cooccurrence_heatmap

        matrix = cooccurrence_matrix(dataset, task.class_set)
        figure = Path(args.figures_dir) / f"cooccurrence_{task.name}.png"
        figure.parent.mkdir(parents=True, exist_ok=True)
        save_cooccurrence_heatmap(matrix, task.class_set, figure, title=task.name)
        log.info("wrote %s", figure)
    return 0


def cmd_index(args) -> int:
    taxonomy = _taxonomy(args)
    contracts = load_corpus(_existing(args.corpus), taxonomy)
    clauses = all_clauses(contracts)
    if not args.include_ok:
        clauses = [c for c in clauses if c.labels]
    if args.split:
        split = SplitAssignment.from_json(_existing(args.split).read_text(encoding="utf-8"))
        keep = {cid for cid in split.ids(args.partition)}
        clauses = [c for c in clauses if c.id in keep]
    if not clauses:
        raise CliError("no clauses selected for indexing")
    _, embedder, _ = _providers(args)
    kb = KnowledgeBase.from_clauses(clauses, embedder)
    kb.save(args.out_dir)
    log.info("indexed %d clauses into %s", len(clauses), args.out_dir)
    return 0


def cmd_train_detector(args) -> int:
    taxonomy = _taxonomy(args)
    task = task_by_name(args.task, taxonomy)
    if task.kind != "detection":
        raise CliError(f"--task must be a detection task, got {args.task}")
    contracts = load_corpus(_existing(args.corpus), taxonomy)
    dataset = derive_task_dataset(contracts, task, taxonomy)
    if args.split:
        split = SplitAssignment.from_json(_existing(args.split).read_text(encoding="utf-8"))
        keep = set(split.ids("train"))
        dataset = [(c, t) for c, t in dataset if c.id in keep]
    pairs = [(c.text, t) for c, t in dataset]
    c_value = args.c
    if args.cv:
        c_value, grid = cross_validate_c(pairs, folds=args.cv_folds, epochs=args.epochs, seed=args.seed)
        log.info("cross-validation picked C=%s from %s", c_value, grid)
    model = train_detector(
        pairs, c=c_value, epochs=args.epochs, seed=args.seed, threshold=args.threshold
    )
    model.save(args.out)
    log.info("wrote detector model to %s", args.out)
    return 0


def _build_engine(args, taxonomy: Taxonomy) -> Engine:
    if not args.kb_dir or not args.detector:
        raise CliError("--kb-dir and --detector are required (flag or --config file)")
    chat, embedder, reranker = _providers(args)
    kb = KnowledgeBase.load(_existing(args.kb_dir))
    detector = LinearDetector.load(_existing(args.detector))
    config = ScanConfig(
        categories=tuple(args.categories.split(",")) if args.categories else CATEGORIES,
        retrieval_mode=args.mode if getattr(args, "mode", None) else "hybrid",
        threshold=args.threshold,
        p=args.p,
        k=args.k,
        min_words=args.min_words,
    )
    return Engine(taxonomy, detector, kb, embedder, reranker, chat, config)


def cmd_scan(args) -> int:
    taxonomy = _taxonomy(args)
    engine = _build_engine(args, taxonomy)
    path = _existing(args.file)
    content = path.read_text(encoding="utf-8")
    content_type = args.content_type
    if content_type == "auto":
        content_type = "html" if path.suffix.lower() in (".html", ".htm") else "text"
    findings = engine.scan(content, content_type)
    _write_or_stdout(findings_to_json(findings), args.out)
    return 0


def cmd_classify(args) -> int:
    taxonomy = _taxonomy(args)
    task = task_by_name(args.task, taxonomy)
    contracts = load_corpus(_existing(args.corpus), taxonomy)
    dataset = derive_task_dataset(contracts, task, taxonomy)
    split = SplitAssignment.from_json(_existing(args.split).read_text(encoding="utf-8"))
    train_ids = set(split.ids("train"))
    eval_ids = set(split.ids(args.partition))
    train_pool = [(c, t) for c, t in dataset if c.id in train_ids]
    eval_pool = [(c, t) for c, t in dataset if c.id in eval_ids]
    if not eval_pool:
        raise CliError(f"no clauses in partition {args.partition!r} for task {task.name}")
    chat, embedder, reranker = _providers(args)

    kb = None
    if args.classify_mode.startswith("rag"):
        kb = KnowledgeBase.build(
            [(c.id, c.text, target_labels(t)) for c, t in train_pool], embedder
        )
    lines = []
    for clause, target in eval_pool:
        if args.classify_mode == "fewshot":
            bundle = build_fewshot_prompt(
                task, clause.text, train_pool, args.shots, args.seed
            )
        else:
            mode = "dense" if args.classify_mode == "rag-dense" else "hybrid"
            query_vec = embedder.embed([clause.text])[0]
            candidates = dense_search(kb.dense, query_vec, args.p)
            if mode == "hybrid":
                candidates = hybrid_merge(
                    candidates, sparse_search(kb.sparse, clause.text, args.p)
                )
            k = min(args.k, len(candidates))
            reranked = rerank(reranker, clause.text, candidates, k, kb.texts)
            examples = [
                PromptExample(
                    r.clause_id,
                    kb.texts[r.clause_id],
                    tuple(sorted(kb.labels[r.clause_id])),
                )
                for r in reranked
            ]
            bundle = build_rag_prompt(task, clause.text, examples, retrieved_p=args.p)
        result = chat.complete(bundle.rendered)
        parsed = parse_labels(result.text, task)
        lines.append(
            json.dumps(
                {
                    "id": clause.id,
                    "gold": sorted(target_labels(target)),
                    "pred": sorted(parsed.labels),
                    "retrieved_labels": sorted(
                        {l for e in bundle.examples for l in e.labels}
                    ),
                    "warnings": parsed.warnings,
                },
                ensure_ascii=False,
            )
        )
    _write_or_stdout("\n".join(lines) + "\n", args.out)
    return 0


def _read_predictions(path: Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def cmd_eval(args) -> int:
    taxonomy = _taxonomy(args)
    task = task_by_name(args.task, taxonomy)
    reports = []
    for path in args.pred:
        records = _read_predictions(_existing(path))
        gold = [frozenset(r["gold"]) for r in records]
        pred = [frozenset(r["pred"]) for r in records]
        reports.append(f1_scores(gold, pred, task.class_set))
    summary = summarize_seed_runs(reports, seeds=list(range(len(reports))))
    _write_or_stdout(summary.to_json(), args.out)
    if args.csv:
        csv_text = results_table_csv({args.method: {task.name: summary}}, [task.name])
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.csv).write_text(csv_text, encoding="utf-8")
        log.info("wrote %s", args.csv)
    if args.figures_dir:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        figure = Path(args.figures_dir) / f"per_label_f1_{task.name}.png"
        figure.parent.mkdir(parents=True, exist_ok=True)
        labels = list(summary.per_label_f1)
        fig, ax = plt.subplots(figsize=(0.5 * len(labels) + 2, 4))
        ax.bar(range(len(labels)), [summary.per_label_f1[l] for l in labels], color="#4878a8")
        ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right", fontsize=8)
        ax.set_ylabel("F1")
        ax.set_ylim(0, 1)
        ax.set_title(f"Per-label F1: {task.name}")
        fig.tight_layout()
        fig.savefig(figure, dpi=150)
        plt.close(fig)
        log.info("wrote %s", figure)
    return 0


def cmd_errors(args) -> int:
    taxonomy = _taxonomy(args)
    task = task_by_name(args.task, taxonomy)
    records = [
        EvalRecord.make(r["gold"], r["pred"], r.get("retrieved_labels", []))
        for r in _read_predictions(_existing(args.pred))
    ]
    decomposition = error_decomposition(records, task.class_set)
    payload = {
        "task": task.name,
        "fn_total": decomposition.fn_total,
        "retrieval_errors": decomposition.retrieval_errors,
        "generation_errors": decomposition.generation_errors,
        "gen_ret_ratio": decomposition.gen_ret_ratio,
        "confusion_pairs": [
            {"gold": g, "predicted": p, "count": c}
            for g, p, c in decomposition.confusion_pairs
        ],
        "support_f1_pearson_r": decomposition.support_f1_pearson_r,
    }
    _write_or_stdout(json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2), args.out)
    if args.figures_dir:
        from .plots import save_error_breakdown_chart

        figure = Path(args.figures_dir) / f"errors_{task.name}.png"
        figure.parent.mkdir(parents=True, exist_ok=True)
        save_error_breakdown_chart({task.name: decomposition}, figure)
        log.info("wrote %s", figure)
    return 0


def cmd_meta(args) -> int:
    text = _existing(args.observations).read_text(encoding="utf-8")
    observations = read_observations_csv(text)
    results = rank_configs(observations)
    _write_or_stdout(ranking_table_csv(results), args.out)
    if args.figures_dir:
        from .plots import save_forest_plot

        figure = Path(args.figures_dir) / "meta_forest.png"
        figure.parent.mkdir(parents=True, exist_ok=True)
        save_forest_plot(results, figure)
        log.info("wrote %s", figure)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    taxonomy = _taxonomy(args)
    engine = _build_engine(args, taxonomy)
    app = create_app(engine)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_common(parser, providers=True, taxonomy=True):
    if providers:
        parser.add_argument("--providers", help="JSON provider config (defaults to stubs)")
    if taxonomy:
        parser.add_argument("--taxonomy", help="JSON taxonomy extension file")
    parser.add_argument("--seed", type=int, default=0, help="random seed")


def _add_engine_args(parser):
    parser.add_argument("--kb-dir", help="knowledge-base index directory")
    parser.add_argument("--detector", help="detector model JSON")
    parser.add_argument("--categories", help="comma-separated category subset")
    parser.add_argument("--mode", choices=("dense", "hybrid"), default="hybrid")
    parser.add_argument("--threshold", type=float, default=None, help="detector threshold override")
    parser.add_argument("--p", type=int, default=15, help="retrieval candidates per source")
    parser.add_argument("--k", type=int, default=5, help="reranked examples per prompt")
    parser.add_argument("--min-words", type=int, default=7, help="chunk word-count filter")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tosguard", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tosguard {__version__}")
    parser.add_argument("--config", help="JSON file with default argument values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="build a stratified train/val/test split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", required=True, choices=TASK_NAMES)
    p.add_argument("--ratios", default="0.7,0.1,0.2")
    p.add_argument("--out", help="output split JSON (default stdout)")
    p.add_argument("--figures-dir", help="emit co-occurrence heatmap here")
    _add_common(p, providers=False)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("index", help="build dense+sparse knowledge-base indexes")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split", help="restrict to a split partition")
    p.add_argument("--partition", default="train", choices=("train", "val", "test"))
    p.add_argument("--include-ok", action="store_true", help="index unlabeled clauses too")
    _add_common(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("train-detector", help="train the linear detection filter")
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", default="joint-detect")
    p.add_argument("--split", help="train on this split's train partition")
    p.add_argument("--out", required=True)
    p.add_argument("--c", type=float, default=10.0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--cv", action="store_true", help="pick C by k-fold cross-validation")
    p.add_argument("--cv-folds", type=int, default=10)
    _add_common(p, providers=False)
    p.set_defaults(func=cmd_train_detector)

    p = sub.add_parser("scan", help="scan a document for abusive clauses")
    p.add_argument("file", help="HTML or text file")
    p.add_argument("--content-type", choices=("html", "text", "auto"), default="auto")
    p.add_argument("--out", help="findings JSON output (default stdout)")
    _add_engine_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("classify", help="batch-classify a split partition")
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", required=True, choices=TASK_NAMES)
    p.add_argument("--split", required=True)
    p.add_argument("--partition", default="test", choices=("train", "val", "test"))
    p.add_argument(
        "--classify-mode",
        default="rag-hybrid",
        choices=("fewshot", "rag-dense", "rag-hybrid"),
    )
    p.add_argument("--shots", type=int, default=5, help="few-shot examples per class")
    p.add_argument("--p", type=int, default=15)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", help="predictions JSONL (default stdout)")
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", help="score a predictions file")
    p.add_argument("--pred", action="append", required=True, help="predictions JSONL (repeat per seed)")
    p.add_argument("--task", required=True, choices=TASK_NAMES)
    p.add_argument("--method", default="method", help="method name for the CSV row")
    p.add_argument("--out", help="report JSON (default stdout)")
    p.add_argument("--csv", help="also write a results-table CSV here")
    p.add_argument("--figures-dir", help="emit per-label F1 chart here")
    _add_common(p, providers=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("errors", help="retrieval vs generation error decomposition")
    p.add_argument("--pred", required=True)
    p.add_argument("--task", required=True, choices=TASK_NAMES)
    p.add_argument("--out", help="report JSON (default stdout)")
    p.add_argument("--figures-dir", help="emit error breakdown chart here")
    _add_common(p, providers=False)
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("meta", help="random-effects ranking of configurations")
    p.add_argument("--observations", required=True, help="CSV of config/task/seed scores")
    p.add_argument("--out", help="ranking CSV (default stdout)")
    p.add_argument("--figures-dir", help="emit forest plot here")
    _add_common(p, providers=False, taxonomy=False)
    p.set_defaults(func=cmd_meta)

    p = sub.add_parser("serve", help="run the local HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    _add_engine_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def _apply_config_file(args: argparse.Namespace) -> None:
    if not getattr(args, "config", None):
        return
    overrides = json.loads(_existing(args.config).read_text(encoding="utf-8"))
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) in (None, [], False):
            setattr(args, attr, value)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_file(args)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except CliError as exc:
        log.error("%s", exc)
        return 1
    except (ValueError, KeyError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # runtime failure
        log.error("runtime error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
