"""App-level AI service reports and the two-level domain/task taxonomy.

Components are labeled through the gateway, labels roll up to an app label by
highest frequency, and per-corpus distributions are aggregated from many apps.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .candidates import ApiSignature, CandidateKind, package_of
from .gateway import ContextOverflow, GatewayError, LlmGateway, TaskId
from .kb import VERDICT_AI, KbRecord, KnowledgeBase
from .pipeline import ComponentVerdict

log = logging.getLogger(__name__)

SUMMARY_UNAVAILABLE = "[summary unavailable: backend failure]"
NO_AI_SUMMARY = "No AI components were detected in this app."
UNCLASSIFIED_TASK = "Unclassified"


class EmptyLabels(Exception):
    """classify_app needs at least one label."""


class DomainLabel(Enum):
    COMPUTER_VISION = "ComputerVision"
    DATA_ANALYSIS = "DataAnalysis"
    NATURAL_LANGUAGE_PROCESSING = "NaturalLanguageProcessing"
    AUDIO_SPEECH_PROCESSING = "AudioSpeechProcessing"
    AUGMENTED_REALITY = "AugmentedReality"
    OTHERS = "Others"

    @property
    def display(self) -> str:
        return _DISPLAY[self]


_DISPLAY = {
    DomainLabel.COMPUTER_VISION: "Computer Vision",
    DomainLabel.DATA_ANALYSIS: "Data Analysis",
    DomainLabel.NATURAL_LANGUAGE_PROCESSING: "Natural Language Processing",
    DomainLabel.AUDIO_SPEECH_PROCESSING: "Audio and Speech Processing",
    DomainLabel.AUGMENTED_REALITY: "Augmented Reality",
    DomainLabel.OTHERS: "Others",
}

# Deterministic tie-break order for app labeling, most common domain first.
DOMAIN_PRECEDENCE = (
    DomainLabel.COMPUTER_VISION,
    DomainLabel.DATA_ANALYSIS,
    DomainLabel.NATURAL_LANGUAGE_PROCESSING,
    DomainLabel.AUDIO_SPEECH_PROCESSING,
    DomainLabel.AUGMENTED_REALITY,
    DomainLabel.OTHERS,
)

_DOMAIN_ALIASES = {
    "cv": DomainLabel.COMPUTER_VISION,
    "da": DomainLabel.DATA_ANALYSIS,
    "nlp": DomainLabel.NATURAL_LANGUAGE_PROCESSING,
    "asp": DomainLabel.AUDIO_SPEECH_PROCESSING,
    "ar": DomainLabel.AUGMENTED_REALITY,
}


def _squash(text: str) -> str:
    return "".join(ch for ch in text.lower() if ch.isalnum())


_DOMAIN_LOOKUP: dict[str, DomainLabel] = {}
for _label in DomainLabel:
    _DOMAIN_LOOKUP[_squash(_label.value)] = _label
    _DOMAIN_LOOKUP[_squash(_label.display)] = _label
for _alias, _label in _DOMAIN_ALIASES.items():
    _DOMAIN_LOOKUP[_alias] = _label


def parse_domain(text: str) -> DomainLabel:
    """Closed-set domain parser; anything unrecognized maps to Others."""
    return _DOMAIN_LOOKUP.get(_squash(text or ""), DomainLabel.OTHERS)


def normalize_task(text: str) -> str:
    cleaned = " ".join((text or "").split())
    return cleaned.title() if cleaned else UNCLASSIFIED_TASK


@dataclass(frozen=True)
class TaxonomyLabel:
    """Domain plus free-form (but normalized) task of one AI component."""

    domain: DomainLabel
    task: str


@dataclass
class AiServiceReport:
    """Per-app AI service summary."""

    app_id: str
    summary: str
    capabilities: list[str] = field(default_factory=list)
    kind_counts: dict[str, int] = field(default_factory=dict)
    app_label: Optional[TaxonomyLabel] = None
    degraded: bool = False


@dataclass
class CorpusStats:
    """Corpus-level distributions over component labels and app labels."""

    component_domain_dist: dict[DomainLabel, float] = field(default_factory=dict)
    component_task_dist: dict[tuple[DomainLabel, str], float] = field(default_factory=dict)
    app_domain_counts: dict[DomainLabel, int] = field(default_factory=dict)
    kind_totals: dict[str, int] = field(default_factory=dict)
    component_label_count: int = 0


def _component_line(verdict: ComponentVerdict) -> str:
    analysis = verdict.analysis or ""
    return f"{verdict.candidate.text} :: {analysis}" if analysis else verdict.candidate.text


def _subsumed_by_package(verdict: ComponentVerdict, ai_packages: set[str]) -> bool:
    if verdict.candidate.kind != CandidateKind.API:
        return False
    class_name = ApiSignature.class_name_of(verdict.candidate.text)
    if not class_name:
        return False
    pkg = package_of(class_name)
    if not pkg:
        return False
    return any(pkg == p or pkg.startswith(p + ".") for p in ai_packages)


def summarize_app(
    app_id: str,
    ai_verdicts: Sequence[ComponentVerdict],
    gateway: LlmGateway,
) -> AiServiceReport:
    """Generate the per-app AI service report from its AI-positive verdicts.

    Low-level API components whose parent package is itself an AI component
    are left out of the prompt; if the remainder still overflows the context
    budget, components are dropped lowest-occurrence-first. Backend failure
    degrades to a marker summary with the raw analyses as capabilities.
    """
    kind_counts = dict(Counter(v.candidate.kind for v in ai_verdicts))
    if not ai_verdicts:
        return AiServiceReport(app_id=app_id, summary=NO_AI_SUMMARY, kind_counts=kind_counts)

    ai_packages = {
        v.candidate.text for v in ai_verdicts if v.candidate.kind == CandidateKind.PACKAGE
    }
    included = [v for v in ai_verdicts if not _subsumed_by_package(v, ai_packages)]
    # Ranked so context truncation drops the least-seen components first.
    included.sort(
        key=lambda v: (
            -v.candidate.occurrences,
            CandidateKind.sort_key(v.candidate.kind),
            v.candidate.text,
        )
    )

    while included:
        lines = [_component_line(v) for v in included]
        try:
            payload = gateway.run_summary(lines)
        except ContextOverflow:
            dropped = included.pop()
            log.info("summary over budget; dropped %s", dropped.candidate.text)
            continue
        except GatewayError as exc:
            log.warning("summary generation failed for %s: %s", app_id, exc)
            return AiServiceReport(
                app_id=app_id,
                summary=SUMMARY_UNAVAILABLE,
                capabilities=[v.analysis for v in included if v.analysis],
                kind_counts=kind_counts,
                degraded=True,
            )
        return AiServiceReport(
            app_id=app_id,
            summary=payload["summary"],
            capabilities=list(payload["capabilities"]),
            kind_counts=kind_counts,
        )

    # Nothing fits the context at all; report what we know verbatim.
    return AiServiceReport(
        app_id=app_id,
        summary=SUMMARY_UNAVAILABLE,
        capabilities=[v.analysis for v in ai_verdicts if v.analysis],
        kind_counts=kind_counts,
        degraded=True,
    )


def classify_components(
    verdicts: Sequence[ComponentVerdict],
    gateway: LlmGateway,
    batch_size: int = 3,
    kb: Optional[KnowledgeBase] = None,
) -> list[TaxonomyLabel]:
    """Label AI components with (domain, task); labels are cached into the KB.

    Components whose KB record already carries both labels are not re-sent.
    Item-level failures label as (Others, Unclassified).
    """
    labels: list[Optional[TaxonomyLabel]] = [None] * len(verdicts)
    pending: list[int] = []
    for i, verdict in enumerate(verdicts):
        if verdict.domain and verdict.task:
            labels[i] = TaxonomyLabel(parse_domain(verdict.domain), normalize_task(verdict.task))
        else:
            pending.append(i)

    if pending:
        items = [_component_line(verdicts[i]) for i in pending]
        try:
            results = gateway.run_items(TaskId.CLASSIFY_TAXONOMY, items, batch_size)
        except GatewayError as exc:
            log.warning("taxonomy classification failed: %s", exc)
            results = None
        for slot, i in enumerate(pending):
            if results is None or results[slot].error or not results[slot].payload:
                label = TaxonomyLabel(DomainLabel.OTHERS, UNCLASSIFIED_TASK)
            else:
                payload = results[slot].payload
                label = TaxonomyLabel(parse_domain(payload["domain"]), normalize_task(payload["task"]))
            labels[i] = label
            verdicts[i].domain = label.domain.value
            verdicts[i].task = label.task
            if kb is not None:
                _cache_label(verdicts[i], label, kb, gateway.model_id)

    return [label for label in labels if label is not None]


def classify_component(
    verdict: ComponentVerdict,
    gateway: LlmGateway,
    kb: Optional[KnowledgeBase] = None,
) -> TaxonomyLabel:
    return classify_components([verdict], gateway, batch_size=1, kb=kb)[0]


def _cache_label(
    verdict: ComponentVerdict, label: TaxonomyLabel, kb: KnowledgeBase, model_id: str
) -> None:
    if not verdict.is_ai:
        return
    kb.insert(
        KbRecord(
            key=verdict.kb_key(),
            verdict=VERDICT_AI,
            analysis=verdict.analysis or "[no analysis]",
            domain=label.domain.value,
            task=label.task,
            model_id=model_id,
        )
    )


def classify_app(labels: Sequence[TaxonomyLabel]) -> TaxonomyLabel:
    """App label = most frequent domain, then most frequent task inside it.

    Domain ties fall back to a fixed precedence order; task ties inside the
    winning domain resolve lexicographically. Permutation-invariant, and
    invariant under scaling every label's multiplicity.
    """
    if not labels:
        raise EmptyLabels("cannot label an app without component labels")
    domain_counts = Counter(label.domain for label in labels)
    best_domain = max(
        domain_counts,
        key=lambda d: (domain_counts[d], -DOMAIN_PRECEDENCE.index(d)),
    )
    task_counts = Counter(label.task for label in labels if label.domain is best_domain)
    top = max(task_counts.values())
    best_task = min(t for t, c in task_counts.items() if c == top)
    return TaxonomyLabel(domain=best_domain, task=best_task)


@dataclass
class AppAggregate:
    """One app's contribution to corpus statistics."""

    app_id: str
    labels: list[TaxonomyLabel] = field(default_factory=list)
    app_label: Optional[TaxonomyLabel] = None
    kind_counts: dict[str, int] = field(default_factory=dict)


_TABLE_KIND_GROUPS = {
    CandidateKind.PACKAGE: "package_api",
    CandidateKind.API: "package_api",
    CandidateKind.MODEL_ASSET: "model",
    CandidateKind.HTTPS_REQUEST: "http_request",
    CandidateKind.OTHER: "others",
}


def aggregate_stats(all_apps: Iterable[AppAggregate]) -> CorpusStats:
    """Corpus roll-up: label distributions, app domain counts, kind totals.

    Each returned distribution sums to 1 (within float error) when nonempty.
    """
    label_counter: Counter[TaxonomyLabel] = Counter()
    app_domains: Counter[DomainLabel] = Counter()
    kind_totals = {group: 0 for group in ("package_api", "model", "http_request", "others")}

    for app in all_apps:
        label_counter.update(app.labels)
        if app.app_label is not None:
            app_domains[app.app_label.domain] += 1
        for kind, count in app.kind_counts.items():
            group = _TABLE_KIND_GROUPS.get(kind)
            if group:
                kind_totals[group] += count

    total_labels = sum(label_counter.values())
    domain_counter: Counter[DomainLabel] = Counter()
    for label, count in label_counter.items():
        domain_counter[label.domain] += count

    domain_dist = (
        {d: c / total_labels for d, c in domain_counter.items()} if total_labels else {}
    )
    task_dist = (
        {(label.domain, label.task): c / total_labels for label, c in label_counter.items()}
        if total_labels
        else {}
    )
    kind_totals["total"] = sum(kind_totals.values())

    return CorpusStats(
        component_domain_dist=domain_dist,
        component_task_dist=task_dist,
        app_domain_counts=dict(app_domains),
        kind_totals=kind_totals,
        component_label_count=total_labels,
    )
