"""Command-line interface: analyze APKs, evaluate against ground truth,
report corpus statistics, and curate description datasets."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .backends import LiveBackend, MockBackend
from .candidates import load_model_suffixes
from .curation import curate, load_descriptions, load_keywords
from .gateway import LlmGateway, SamplingConfig
from .kb import VERDICT_AI, KnowledgeBase, SummaryCache, kb_sync, normalize_text, utc_now
from .metrics import EmptyIntersection, cohen_kappa, confusion
from .pipeline import PipelineConfig, PipelineOrder
from .prompts import load_templates
from .report import (
    analyze_app,
    iter_report_paths,
    read_report,
    report_aggregate,
    report_labels,
    write_report,
)
from .taxonomy import (
    AppAggregate,
    CorpusStats,
    TaxonomyLabel,
    aggregate_stats,
    normalize_task,
    parse_domain,
)
from .whitelist import EmptyWhitelist, Whitelist, load_whitelist

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

FIXED_CLOCK_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class NoLabeledRecords(Exception):
    """The stats input carries no AI-labeled records at all."""


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _setting(args: argparse.Namespace, file_cfg: dict, name: str, default):
    """CLI flag beats config file beats default."""
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in file_cfg:
        return file_cfg[name]
    return default


def build_pipeline_config(args: argparse.Namespace, file_cfg: dict) -> PipelineConfig:
    sampling_cfg = file_cfg.get("sampling", {})
    sampling = SamplingConfig(
        temperature=sampling_cfg.get("temperature", 0.2),
        top_p=sampling_cfg.get("top_p", 0.95),
        max_context_tokens=sampling_cfg.get("max_context_tokens", 4096),
    )
    order = PipelineOrder.parse(str(_setting(args, file_cfg, "order", "atd")))
    kb = _setting(args, file_cfg, "kb", None)
    whitelist = _setting(args, file_cfg, "whitelist", None)
    return PipelineConfig(
        order=order,
        batch_size=int(_setting(args, file_cfg, "batch_size", 3)),
        sampling=sampling,
        few_shot_k=int(file_cfg.get("few_shot_k", 5)),
        audience=str(_setting(args, file_cfg, "audience", "user")),
        whitelist_path=Path(whitelist) if whitelist else None,
        kb_path=Path(kb) if kb else None,
        max_in_flight=int(file_cfg.get("max_in_flight", 4)),
        retry_budget=int(file_cfg.get("retry_budget", 2)),
    )


def make_gateway(args: argparse.Namespace, file_cfg: dict, cfg: PipelineConfig) -> LlmGateway:
    backend_name = str(_setting(args, file_cfg, "backend", "mock"))
    if backend_name == "mock":
        backend = MockBackend()
    elif backend_name == "live":
        model = str(_setting(args, file_cfg, "model", "gpt-3.5-turbo"))
        endpoint = file_cfg.get("endpoint", "https://api.openai.com/v1/chat/completions")
        backend = LiveBackend(model=model, endpoint=endpoint)
    else:
        raise ValueError(f"unknown backend {backend_name!r}")
    templates = load_templates(few_shot_k=cfg.few_shot_k, audience=cfg.audience)
    return LlmGateway(
        backend,
        templates,
        sampling=cfg.sampling,
        retry_budget=cfg.retry_budget,
        max_in_flight=cfg.max_in_flight,
    )


def _load_whitelist_or_warn(path: Optional[Path]) -> Whitelist:
    try:
        return load_whitelist(path)
    except EmptyWhitelist as exc:
        log.warning("whitelist empty (%s); proceeding unfiltered", exc)
        return Whitelist.empty()


def cmd_analyze(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = build_pipeline_config(args, file_cfg)
    gateway = make_gateway(args, file_cfg, cfg)
    whitelist = _load_whitelist_or_warn(cfg.whitelist_path)
    suffixes = load_model_suffixes(args.model_suffixes) if args.model_suffixes else None

    kb = kb_sync(cfg.kb_path)
    cache = SummaryCache(Path(str(cfg.kb_path) + ".summaries") if cfg.kb_path else None)
    clock = (lambda: FIXED_CLOCK_EPOCH) if args.deterministic else utc_now
    kb.clock = clock

    jobs = 1 if args.deterministic else (args.jobs or os.cpu_count() or 1)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(apk_path: str) -> dict:
        entry = {"apk": apk_path, "app_id": Path(apk_path).stem}
        try:
            report = analyze_app(
                apk_path,
                cfg,
                kb,
                gateway,
                whitelist,
                summary_cache=cache,
                model_suffixes=suffixes,
                clock=clock,
            )
            path = write_report(report, out_dir)
            entry.update(status="ok", report=str(path), is_ai_app=report["is_ai_app"])
        except Exception as exc:  # noqa: BLE001 - per-app isolation
            log.error("analysis failed for %s: %s", apk_path, exc)
            entry.update(status="error", error=f"{type(exc).__name__}: {exc}")
        return entry

    if jobs > 1 and len(args.apks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(one, args.apks))
    else:
        entries = [one(p) for p in args.apks]

    manifest = {
        "apps": entries,
        "backend_calls": gateway.call_count,
        "failed": sum(1 for e in entries if e["status"] == "error"),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    ok = sum(1 for e in entries if e["status"] == "ok")
    print(f"analyzed {ok}/{len(entries)} apps; reports in {out_dir}")
    return EXIT_OK if ok > 0 else EXIT_FAILURE


def load_label_file(path: Path) -> dict[str, str]:
    """Read a labels JSONL file into key -> AI/NonAI.

    Component records carry (kind, text); app records carry app_id.
    """
    labels: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            payload = json.loads(line)
            label = payload["label"]
            if label not in ("AI", "NonAI"):
                raise ValueError(f"{path}:{lineno}: label must be AI or NonAI")
            if "app_id" in payload:
                labels[f"app::{payload['app_id']}"] = label
            else:
                labels[f"{payload['kind']}::{normalize_text(payload['text'])}"] = label
    return labels


def load_predictions(path: Path) -> dict[str, str]:
    """Predictions from either a report directory or a labels JSONL file."""
    if path.is_dir():
        labels: dict[str, str] = {}
        for report_path in iter_report_paths(path):
            component_labels, app_labels = report_labels(read_report(report_path))
            labels.update(component_labels)
            labels.update(app_labels)
        return labels
    return load_label_file(path)


def run_evaluate(predictions_path: Path, truth_path: Path) -> dict:
    """Confusion metrics plus kappa over the key intersection."""
    predictions = load_predictions(predictions_path)
    truth = load_label_file(truth_path)
    metrics, uncovered = confusion(predictions, truth)
    shared = sorted(set(predictions) & set(truth))
    kappa = cohen_kappa([predictions[k] for k in shared], [truth[k] for k in shared])
    return {
        "true_positives": metrics.true_positives,
        "false_positives": metrics.false_positives,
        "false_negatives": metrics.false_negatives,
        "true_negatives": metrics.true_negatives,
        "precision": metrics.precision,
        "recall": metrics.recall,
        "kappa": kappa,
        "compared": metrics.total,
        "coverage_warnings": [f"key only on one side: {k}" for k in uncovered],
    }


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        result = run_evaluate(Path(args.predictions), Path(args.truth))
    except EmptyIntersection as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if args.json:
        print(json.dumps(result, indent=2, sort_keys=True))
    else:
        precision = "undefined" if result["precision"] is None else f"{result['precision']:.4f}"
        recall = "undefined" if result["recall"] is None else f"{result['recall']:.4f}"
        print(f"compared:  {result['compared']}")
        print(
            "confusion: "
            f"TP={result['true_positives']} FP={result['false_positives']} "
            f"FN={result['false_negatives']} TN={result['true_negatives']}"
        )
        print(f"precision: {precision}")
        print(f"recall:    {recall}")
        print(f"kappa:     {result['kappa']:.4f}")
        for warning in result["coverage_warnings"]:
            print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def stats_from_kb(kb: KnowledgeBase) -> CorpusStats:
    """Component-level statistics straight from the knowledge base.

    The KB has no app identity, so app-level counts stay empty.
    """
    ai_records = [r for r in kb.records.values() if r.verdict == VERDICT_AI]
    if not ai_records:
        raise NoLabeledRecords("knowledge base holds no AI records")
    labels = [
        TaxonomyLabel(parse_domain(r.domain), normalize_task(r.task))
        for r in ai_records
        if r.domain and r.task
    ]
    kind_counts: dict[str, int] = {}
    for record in ai_records:
        kind_counts[record.key.kind] = kind_counts.get(record.key.kind, 0) + 1
    aggregate = AppAggregate(app_id="<kb>", labels=labels, app_label=None, kind_counts=kind_counts)
    return aggregate_stats([aggregate])


def stats_from_reports(report_dir: Path) -> CorpusStats:
    aggregates = [report_aggregate(read_report(p)) for p in iter_report_paths(report_dir)]
    if not aggregates:
        raise NoLabeledRecords(f"no reports under {report_dir}")
    stats = aggregate_stats(aggregates)
    if stats.kind_totals.get("total", 0) == 0 and not stats.component_domain_dist:
        raise NoLabeledRecords("reports contain no AI-labeled components")
    return stats


def stats_document(stats: CorpusStats) -> dict:
    return {
        "kind_totals": stats.kind_totals,
        "component_domain_dist": {d.value: f for d, f in sorted(stats.component_domain_dist.items(), key=lambda kv: kv[0].value)},
        "component_task_dist": {
            f"{d.value}/{task}": f
            for (d, task), f in sorted(stats.component_task_dist.items(), key=lambda kv: (kv[0][0].value, kv[0][1]))
        },
        "app_domain_counts": {d.value: c for d, c in sorted(stats.app_domain_counts.items(), key=lambda kv: kv[0].value)},
        "component_label_count": stats.component_label_count,
    }


def render_stats_text(stats: CorpusStats) -> str:
    lines = ["AI component totals by kind"]
    header = f"  {'kind':<14} {'count':>8}"
    lines.append(header)
    for group in ("package_api", "model", "http_request", "others", "total"):
        lines.append(f"  {group:<14} {stats.kind_totals.get(group, 0):>8}")
    if stats.component_domain_dist:
        lines.append("Component domain distribution")
        for domain, fraction in sorted(
            stats.component_domain_dist.items(), key=lambda kv: -kv[1]
        ):
            lines.append(f"  {domain.display:<30} {fraction * 100:6.2f}%")
    if stats.app_domain_counts:
        lines.append("Apps per primary domain")
        for domain, count in sorted(stats.app_domain_counts.items(), key=lambda kv: -kv[1]):
            lines.append(f"  {domain.display:<30} {count:>6}")
    return "\n".join(lines) + "\n"


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        if args.kb:
            stats = stats_from_kb(kb_sync(Path(args.kb)))
        else:
            stats = stats_from_reports(Path(args.reports))
    except NoLabeledRecords as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if args.json:
        print(json.dumps(stats_document(stats), indent=2, sort_keys=True))
    else:
        print(render_stats_text(stats), end="")
    return EXIT_OK


def cmd_curate(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = build_pipeline_config(args, file_cfg)
    gateway = make_gateway(args, file_cfg, cfg)
    keywords = load_keywords(args.keywords)
    descriptions = load_descriptions(args.descriptions)

    result = curate(descriptions, keywords, gateway, batch_size=cfg.batch_size)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(
        f"input: {len(descriptions)}  keyword pass: {result.stage1_passed}  "
        f"semantic pass: {result.stage2_passed}"
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for desc in result.selected:
                fh.write(
                    json.dumps(
                        {
                            "package_name": desc.package_name,
                            "text": desc.text,
                            "release_date": desc.release_date.isoformat()
                            if desc.release_date
                            else None,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    else:
        for desc in result.selected:
            print(desc.package_name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aidiscover",
        description="Discover and summarize AI capabilities in Android APKs.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--backend", choices=["mock", "live"], help="completion backend")
    common.add_argument("--model", help="model name for the live backend")
    common.add_argument("--batch-size", type=int, dest="batch_size", help="items per request")
    common.add_argument("--order", choices=["atd", "dta"], help="analysis/detection order")
    common.add_argument("--audience", choices=["user", "developer", "regulator"])

    p_analyze = sub.add_parser("analyze", parents=[common], help="analyze APK files end to end")
    p_analyze.add_argument("apks", nargs="+", metavar="APK")
    p_analyze.add_argument("--out", default="reports", help="report output directory")
    p_analyze.add_argument("--kb", help="knowledge base log path")
    p_analyze.add_argument("--whitelist", help="non-AI prefix whitelist file")
    p_analyze.add_argument("--model-suffixes", help="model asset suffix list file")
    p_analyze.add_argument("--jobs", type=int, help="parallel apps (default: CPU count)")
    p_analyze.add_argument(
        "--deterministic",
        action="store_true",
        help="fixed clock and single worker for reproducible reports",
    )
    p_analyze.set_defaults(func=cmd_analyze)

    p_eval = sub.add_parser("evaluate", help="score predictions against ground-truth labels")
    p_eval.add_argument("--predictions", required=True, help="report directory or labels JSONL")
    p_eval.add_argument("--truth", required=True, help="ground-truth labels JSONL")
    p_eval.add_argument("--json", action="store_true", help="machine-readable output")
    p_eval.set_defaults(func=cmd_evaluate)

    p_stats = sub.add_parser("stats", help="corpus statistics from a KB or report directory")
    group = p_stats.add_mutually_exclusive_group(required=True)
    group.add_argument("--kb", help="knowledge base log path")
    group.add_argument("--reports", help="report directory")
    p_stats.add_argument("--json", action="store_true", help="machine-readable output")
    p_stats.set_defaults(func=cmd_stats)

    p_curate = sub.add_parser(
        "curate", parents=[common], help="two-stage screen over app descriptions"
    )
    p_curate.add_argument("--descriptions", required=True, help="JSONL description records")
    p_curate.add_argument("--keywords", help="keyword phrase file")
    p_curate.add_argument("--out", help="write survivors as JSONL here")
    p_curate.set_defaults(func=cmd_curate)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
