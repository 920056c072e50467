"""Per-candidate verdict pipeline: KB consult, LLM analysis and detection in
either order, conservative failure handling, and KB write-back."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .candidates import Candidate, CandidateSet
from .gateway import BackendUnavailable, ItemResult, LlmGateway, SamplingConfig, TaskId
from .kb import VERDICT_AI, VERDICT_NON_AI, KbKey, KbRecord, KnowledgeBase

log = logging.getLogger(__name__)

FAILURE_ANALYSIS = "[analysis unavailable: backend item failure]"
FAILURE_RATIONALE = "[detection unavailable: backend item failure; defaulted to non-AI]"

PROVENANCE_KB = "KbHit"
PROVENANCE_FRESH = "FreshLlm"


class PipelineOrder(Enum):
    ANALYSIS_THEN_DETECTION = "atd"
    DETECTION_THEN_ANALYSIS = "dta"

    @classmethod
    def parse(cls, value: str) -> "PipelineOrder":
        for member in cls:
            if value in (member.value, member.name.lower()):
                return member
        raise ValueError(f"unknown pipeline order {value!r}")


@dataclass
class PipelineConfig:
    """Every knob of one analysis run, including all sampling defaults."""

    order: PipelineOrder = PipelineOrder.ANALYSIS_THEN_DETECTION
    batch_size: int = 3
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    few_shot_k: int = 5
    audience: str = "user"
    whitelist_path: Optional[Path] = None
    kb_path: Optional[Path] = None
    max_in_flight: int = 4
    retry_budget: int = 2

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive: {self.batch_size}")
        if self.few_shot_k < 1:
            raise ValueError(f"few_shot_k must be positive: {self.few_shot_k}")


@dataclass
class ComponentVerdict:
    """Is-AI decision for one candidate, with its supporting texts."""

    candidate: Candidate
    is_ai: bool
    analysis: Optional[str] = None
    rationale: Optional[str] = None
    provenance: str = PROVENANCE_FRESH
    domain: Optional[str] = None
    task: Optional[str] = None

    def kb_key(self) -> KbKey:
        return KbKey.make(self.candidate.kind, self.candidate.text)


@dataclass
class PipelineResult:
    """All verdicts of one run plus degradation flags."""

    verdicts: list[ComponentVerdict]
    degraded: bool = False
    warnings: list[str] = field(default_factory=list)


def _detect_item(candidate: Candidate, analysis: Optional[str]) -> str:
    if analysis:
        return f"{candidate.text} :: {analysis}"
    return candidate.text


def analyze_component(candidate: Candidate, gateway: LlmGateway) -> str:
    """Functional description of one candidate; failure yields the marker text."""
    result = gateway.run_items(TaskId.ANALYZE, [candidate.text], batch_size=1)[0]
    if result.error or not result.payload:
        return FAILURE_ANALYSIS
    return result.payload["analysis"]


def detect_component(
    candidate: Candidate, analysis: Optional[str], gateway: LlmGateway
) -> tuple[bool, str]:
    """AI/non-AI decision for one candidate; failures default to non-AI."""
    item = _detect_item(candidate, analysis)
    result = gateway.run_items(TaskId.DETECT, [item], batch_size=1)[0]
    if result.error or not result.payload:
        return False, FAILURE_RATIONALE
    return result.payload["is_ai"], result.payload["rationale"]


def _analysis_of(result: ItemResult) -> str:
    if result.error or not result.payload:
        return FAILURE_ANALYSIS
    return result.payload["analysis"]


def run_pipeline(
    cand_set: CandidateSet,
    cfg: PipelineConfig,
    kb: KnowledgeBase,
    gateway: LlmGateway,
) -> PipelineResult:
    """Produce exactly one verdict per candidate, in candidate order.

    KB hits short-circuit without any backend traffic; fresh verdicts are
    written back to the KB immediately. If the backend goes away mid-run the
    unresolved candidates are failed conservatively and the run is flagged
    degraded, while KB-resolved verdicts are still returned.
    """
    verdicts: dict[int, ComponentVerdict] = {}
    fresh: list[tuple[int, Candidate]] = []

    for position, candidate in enumerate(cand_set.candidates):
        record = kb.lookup(KbKey.make(candidate.kind, candidate.text))
        if record is not None:
            verdicts[position] = ComponentVerdict(
                candidate=candidate,
                is_ai=record.verdict == VERDICT_AI,
                analysis=record.analysis,
                rationale=f"Reused prior verdict from knowledge base (model {record.model_id})",
                provenance=PROVENANCE_KB,
                domain=record.domain,
                task=record.task,
            )
        else:
            fresh.append((position, candidate))

    warnings: list[str] = []
    degraded = False
    try:
        if fresh:
            if cfg.order is PipelineOrder.ANALYSIS_THEN_DETECTION:
                _run_analysis_first(fresh, cfg, gateway, verdicts)
            else:
                _run_detection_first(fresh, cfg, gateway, verdicts)
    except BackendUnavailable as exc:
        degraded = True
        warnings.append(f"backend unavailable mid-run: {exc}")
        for position, candidate in fresh:
            if position not in verdicts:
                verdicts[position] = ComponentVerdict(
                    candidate=candidate,
                    is_ai=False,
                    analysis=None,
                    rationale=FAILURE_RATIONALE,
                    provenance=PROVENANCE_FRESH,
                )

    for position, verdict in verdicts.items():
        if verdict.provenance == PROVENANCE_FRESH and not degraded and _reliable(verdict):
            _write_back(verdict, kb, gateway.model_id)

    ordered = [verdicts[i] for i in range(len(cand_set.candidates))]
    return PipelineResult(verdicts=ordered, degraded=degraded, warnings=warnings)


def _run_analysis_first(
    fresh: list[tuple[int, Candidate]],
    cfg: PipelineConfig,
    gateway: LlmGateway,
    verdicts: dict[int, ComponentVerdict],
) -> None:
    candidates = [c for _, c in fresh]
    analyses = [
        _analysis_of(r)
        for r in gateway.run_items(TaskId.ANALYZE, [c.text for c in candidates], cfg.batch_size)
    ]
    detect_items = [_detect_item(c, a) for c, a in zip(candidates, analyses)]
    detections = gateway.run_items(TaskId.DETECT, detect_items, cfg.batch_size)
    for (position, candidate), analysis, detection in zip(fresh, analyses, detections):
        if detection.error or not detection.payload:
            is_ai, rationale = False, FAILURE_RATIONALE
        else:
            is_ai, rationale = detection.payload["is_ai"], detection.payload["rationale"]
        verdicts[position] = ComponentVerdict(
            candidate=candidate,
            is_ai=is_ai,
            analysis=analysis,
            rationale=rationale,
            provenance=PROVENANCE_FRESH,
        )


def _run_detection_first(
    fresh: list[tuple[int, Candidate]],
    cfg: PipelineConfig,
    gateway: LlmGateway,
    verdicts: dict[int, ComponentVerdict],
) -> None:
    candidates = [c for _, c in fresh]
    detections = gateway.run_items(TaskId.DETECT, [c.text for c in candidates], cfg.batch_size)

    positives: list[int] = []  # indexes into `fresh`
    for i, ((position, candidate), detection) in enumerate(zip(fresh, detections)):
        if detection.error or not detection.payload:
            is_ai, rationale = False, FAILURE_RATIONALE
        else:
            is_ai, rationale = detection.payload["is_ai"], detection.payload["rationale"]
        verdicts[position] = ComponentVerdict(
            candidate=candidate,
            is_ai=is_ai,
            analysis=None,
            rationale=rationale,
            provenance=PROVENANCE_FRESH,
        )
        if is_ai:
            positives.append(i)

    # Positives still get analyzed so every AI verdict carries an analysis.
    if positives:
        texts = [fresh[i][1].text for i in positives]
        analyses = gateway.run_items(TaskId.ANALYZE, texts, cfg.batch_size)
        for i, analysis in zip(positives, analyses):
            verdicts[fresh[i][0]].analysis = _analysis_of(analysis)


def _reliable(verdict: ComponentVerdict) -> bool:
    # Verdicts that only exist because an item failed are transient; caching
    # them would make the failure permanent across runs.
    if verdict.rationale == FAILURE_RATIONALE:
        return False
    if verdict.is_ai and verdict.analysis == FAILURE_ANALYSIS:
        return False
    return True


def _write_back(verdict: ComponentVerdict, kb: KnowledgeBase, model_id: str) -> None:
    if verdict.is_ai:
        record = KbRecord(
            key=verdict.kb_key(),
            verdict=VERDICT_AI,
            analysis=verdict.analysis or FAILURE_ANALYSIS,
            domain=verdict.domain,
            task=verdict.task,
            model_id=model_id,
        )
    else:
        analysis = verdict.analysis if verdict.analysis != FAILURE_ANALYSIS else None
        record = KbRecord(
            key=verdict.kb_key(),
            verdict=VERDICT_NON_AI,
            analysis=analysis,
            model_id=model_id,
        )
    kb.insert(record)


def is_ai_app(verdicts: list[ComponentVerdict]) -> bool:
    """An app counts as an AI app when at least one component verdict is AI."""
    return any(v.is_ai for v in verdicts)
