"""Uniform access to a completion backend.

Handles prompt rendering with few-shot examples, fixed-size batching,
structured-output parsing with index alignment, context budgeting, and the
retry ladder: whole-batch retries, then singleton fallback, then per-item
failure. A monotone request counter is kept for cache and ordering tests.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence, TypeVar

log = logging.getLogger(__name__)

T = TypeVar("T")


class GatewayError(Exception):
    """Base class for gateway failures."""


class MalformedJson(GatewayError):
    """The backend response could not be parsed into the expected schema."""


class MisalignedOutput(GatewayError):
    """Result count or index set does not match the request items."""


class RateLimited(GatewayError):
    """The backend asked us to slow down."""


class ContextOverflow(GatewayError):
    """Rendered prompt would not fit the context window."""


class BackendUnavailable(GatewayError):
    """The backend cannot be reached or keeps failing."""


class TaskId:
    ANALYZE = "Analyze"
    DETECT = "Detect"
    SUMMARIZE = "Summarize"
    CLASSIFY_TAXONOMY = "ClassifyTaxonomy"
    DESCRIPTION_SCREEN = "DescriptionScreen"

    ARRAY_TASKS = (ANALYZE, DETECT, CLASSIFY_TAXONOMY, DESCRIPTION_SCREEN)
    FEW_SHOT_REQUIRED = ARRAY_TASKS


@dataclass(frozen=True)
class SamplingConfig:
    """Backend sampling knobs; defaults favor consistency over creativity."""

    temperature: float = 0.2
    top_p: float = 0.95
    max_context_tokens: int = 4096

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature out of range: {self.temperature}")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p out of range: {self.top_p}")
        if self.max_context_tokens < 1:
            raise ValueError(f"max_context_tokens must be positive: {self.max_context_tokens}")


@dataclass(frozen=True)
class PromptTemplate:
    """Instruction plus in-context examples for one task."""

    task_id: str
    instruction: str
    few_shot: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.task_id in TaskId.FEW_SHOT_REQUIRED and len(self.few_shot) < 1:
            raise ValueError(f"{self.task_id} template requires at least one example")


@dataclass(frozen=True)
class BatchRequest:
    """One backend call: a template and at most batch_size item texts."""

    template: PromptTemplate
    items: tuple[str, ...]
    batch_size: int = 3

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive: {self.batch_size}")
        if not 1 <= len(self.items) <= self.batch_size:
            raise ValueError(f"items length {len(self.items)} not in [1, {self.batch_size}]")


@dataclass
class ItemResult:
    """Parsed payload for one request item, or a per-item failure."""

    item_index: int
    payload: Optional[dict]
    error: Optional[str] = None


@dataclass(frozen=True)
class RenderedRequest:
    """What a backend actually sees."""

    task_id: str
    items: tuple[str, ...]
    prompt: str
    sampling: SamplingConfig


class Backend(Protocol):
    """Completion provider; returns raw response text for one request."""

    model_id: str

    def complete(self, request: RenderedRequest) -> str: ...


def chunk(items: Sequence[T], batch_size: int) -> list[list[T]]:
    """Split into order-preserving batches; all full except possibly the last."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive: {batch_size}")
    return [list(items[i : i + batch_size]) for i in range(0, len(items), batch_size)]


_SCHEMA_DIRECTIVES = {
    TaskId.ANALYZE: (
        "Reply with a JSON array only, one object per item, shaped "
        '[{"index": <0-based item number>, "analysis": "<functional description>"}].'
    ),
    TaskId.DETECT: (
        "Reply with a JSON array only, one object per item, shaped "
        '[{"index": <0-based item number>, "is_ai": <true|false>, "rationale": "<why>"}].'
    ),
    TaskId.CLASSIFY_TAXONOMY: (
        "Reply with a JSON array only, one object per item, shaped "
        '[{"index": <0-based item number>, "domain": "<AI domain>", "task": "<AI task>"}].'
    ),
    TaskId.DESCRIPTION_SCREEN: (
        "Reply with a JSON array only, one object per item, shaped "
        '[{"index": <0-based item number>, "likely_ai": <true|false>}].'
    ),
    TaskId.SUMMARIZE: (
        "Reply with a single JSON object only, shaped "
        '{"summary": "<short report>", "capabilities": ["<capability>", ...]}.'
    ),
}

# The response shares the context window with the prompt, so reserve output
# room per item on top of the prompt estimate. Rough is fine; this only has
# to trip the batch splitter reliably.
_CHARS_PER_TOKEN = 4
_OUTPUT_TOKENS_PER_ITEM = 128
_CONTEXT_SAFETY = 0.8


def estimate_tokens(prompt: str, items: Sequence[str]) -> int:
    prompt_tokens = len(prompt) // _CHARS_PER_TOKEN
    echo_tokens = sum(len(i) for i in items) // _CHARS_PER_TOKEN
    return prompt_tokens + echo_tokens + _OUTPUT_TOKENS_PER_ITEM * len(items)


def render_prompt(req: BatchRequest, sampling: Optional[SamplingConfig] = None) -> str:
    """Compose instruction, examples, numbered items, and the schema directive.

    Raises:
        ContextOverflow: the estimate exceeds the context budget; the caller
            must split the batch.
    """
    sampling = sampling or SamplingConfig()
    lines = [req.template.instruction.rstrip()]
    if req.template.few_shot:
        lines.append("")
        lines.append("Examples:")
        for example_in, example_out in req.template.few_shot:
            lines.append(f"Input: {example_in}")
            lines.append(f"Output: {example_out}")
    lines.append("")
    lines.append("Items:")
    for number, item in enumerate(req.items, start=1):
        lines.append(f"{number}. {item}")
    lines.append("")
    lines.append(_SCHEMA_DIRECTIVES[req.template.task_id])
    prompt = "\n".join(lines)

    budget = int(sampling.max_context_tokens * _CONTEXT_SAFETY)
    estimate = estimate_tokens(prompt, req.items)
    if estimate > budget:
        raise ContextOverflow(f"estimated {estimate} tokens over budget {budget}")
    return prompt


def _extract_json(raw: str, opener: str, closer: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        pass
    start = raw.find(opener)
    end = raw.rfind(closer)
    if start < 0 or end <= start:
        raise MalformedJson(f"no JSON {opener}...{closer} in response")
    try:
        return json.loads(raw[start : end + 1])
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"unparseable response: {exc}") from exc


_REQUIRED_FIELDS = {
    TaskId.ANALYZE: (("analysis", str),),
    TaskId.DETECT: (("is_ai", bool), ("rationale", str)),
    TaskId.CLASSIFY_TAXONOMY: (("domain", str), ("task", str)),
    TaskId.DESCRIPTION_SCREEN: (("likely_ai", bool),),
}


def parse_aligned(task_id: str, raw: str, item_count: int) -> list[dict]:
    """Parse an array-task response and check index alignment.

    Returns payloads ordered by item index 0..N-1.

    Raises:
        MalformedJson: not JSON, or an element violates the task schema.
        MisalignedOutput: element count or index set is wrong.
    """
    data = _extract_json(raw, "[", "]")
    if not isinstance(data, list):
        raise MalformedJson("expected a JSON array")
    if len(data) != item_count:
        raise MisalignedOutput(f"got {len(data)} results for {item_count} items")
    by_index: dict[int, dict] = {}
    for element in data:
        if not isinstance(element, dict) or not isinstance(element.get("index"), int):
            raise MalformedJson(f"element without integer index: {element!r}")
        by_index[element["index"]] = element
    if set(by_index) != set(range(item_count)):
        raise MisalignedOutput(f"index set {sorted(by_index)} != 0..{item_count - 1}")
    for element in by_index.values():
        for name, typ in _REQUIRED_FIELDS[task_id]:
            value = element.get(name)
            # bool is an int subtype; keep the check strict both ways.
            if not isinstance(value, typ) or (typ is not bool and isinstance(value, bool)):
                raise MalformedJson(f"field {name!r} missing or mistyped in {element!r}")
    return [by_index[i] for i in range(item_count)]


def parse_summary(raw: str) -> dict:
    """Parse the single-object summary response."""
    data = _extract_json(raw, "{", "}")
    if not isinstance(data, dict) or not isinstance(data.get("summary"), str):
        raise MalformedJson("summary response must be an object with a 'summary' string")
    capabilities = data.get("capabilities", [])
    if not isinstance(capabilities, list) or not all(isinstance(c, str) for c in capabilities):
        raise MalformedJson("'capabilities' must be a list of strings")
    return {"summary": data["summary"], "capabilities": capabilities}


class LlmGateway:
    """Batching, retrying front door to one completion backend.

    At most ``max_in_flight`` requests run concurrently; the request counter
    and per-task counters are safe to read from tests after a run.
    """

    def __init__(
        self,
        backend: Backend,
        templates: dict[str, PromptTemplate],
        sampling: Optional[SamplingConfig] = None,
        retry_budget: int = 2,
        max_in_flight: int = 4,
        rate_limit_retries: int = 5,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.templates = templates
        self.sampling = sampling or SamplingConfig()
        self.retry_budget = retry_budget
        self.rate_limit_retries = rate_limit_retries
        self.sleeper = sleeper
        self.call_count = 0
        self.call_counts: Counter[str] = Counter()
        self._counter_lock = threading.Lock()
        self._in_flight = threading.BoundedSemaphore(max_in_flight)

    @property
    def model_id(self) -> str:
        return self.backend.model_id

    def reset_counters(self) -> None:
        with self._counter_lock:
            self.call_count = 0
            self.call_counts = Counter()

    def _complete(self, task_id: str, items: tuple[str, ...], prompt: str) -> str:
        request = RenderedRequest(task_id=task_id, items=items, prompt=prompt, sampling=self.sampling)
        delay = 1.0
        for attempt in range(self.rate_limit_retries + 1):
            with self._counter_lock:
                self.call_count += 1
                self.call_counts[task_id] += 1
            try:
                with self._in_flight:
                    return self.backend.complete(request)
            except RateLimited:
                if attempt == self.rate_limit_retries:
                    raise BackendUnavailable("rate limited past retry budget")
                log.info("rate limited; backing off %.0fs", delay)
                self.sleeper(delay)
                delay = min(delay * 2, 30.0)
        raise BackendUnavailable("unreachable")  # pragma: no cover

    def run_batch(self, req: BatchRequest) -> list[ItemResult]:
        """One aligned result per item, in item order.

        Parse or alignment failures retry the whole batch, then fall back to
        singleton batches; only an item that still fails alone is failed, via
        ItemResult.error. Context overflow splits the batch automatically;
        a single item that alone overflows is failed.
        """
        try:
            prompt = render_prompt(req, self.sampling)
        except ContextOverflow as exc:
            if len(req.items) == 1:
                log.warning("item does not fit context alone: %s", exc)
                return [ItemResult(0, None, error=f"ContextOverflow: {exc}")]
            mid = (len(req.items) + 1) // 2
            left = self.run_batch(BatchRequest(req.template, req.items[:mid], req.batch_size))
            right = self.run_batch(BatchRequest(req.template, req.items[mid:], req.batch_size))
            return _stitch(left, right, mid)

        failure: Optional[GatewayError] = None
        for _ in range(self.retry_budget + 1):
            raw = self._complete(req.template.task_id, req.items, prompt)
            try:
                payloads = parse_aligned(req.template.task_id, raw, len(req.items))
                return [ItemResult(i, payloads[i]) for i in range(len(req.items))]
            except (MalformedJson, MisalignedOutput) as exc:
                failure = exc
                log.warning("batch of %d failed (%s); retrying", len(req.items), exc)

        if len(req.items) == 1:
            return [ItemResult(0, None, error=f"{type(failure).__name__}: {failure}")]
        log.warning("falling back to singleton batches after: %s", failure)
        results: list[ItemResult] = []
        for index, item in enumerate(req.items):
            single = self.run_batch(BatchRequest(req.template, (item,), req.batch_size))[0]
            results.append(ItemResult(index, single.payload, single.error))
        return results

    def run_items(self, task_id: str, items: Sequence[str], batch_size: int = 3) -> list[ItemResult]:
        """Chunk items and run every batch; results keep global input order."""
        template = self.templates[task_id]
        out: list[ItemResult] = []
        for offset_batch in chunk(list(items), batch_size):
            batch = self.run_batch(BatchRequest(template, tuple(offset_batch), batch_size))
            base = len(out)
            out.extend(ItemResult(base + r.item_index, r.payload, r.error) for r in batch)
        return out

    def run_summary(self, items: Sequence[str]) -> dict:
        """One Summarize request over pre-assembled component lines.

        Raises ContextOverflow instead of splitting: the caller owns the
        ranking/truncation policy for summaries.
        """
        template = self.templates[TaskId.SUMMARIZE]
        req = BatchRequest(template, tuple(items), batch_size=max(len(items), 1))
        prompt = render_prompt(req, self.sampling)
        failure: Optional[GatewayError] = None
        for _ in range(self.retry_budget + 1):
            raw = self._complete(TaskId.SUMMARIZE, req.items, prompt)
            try:
                return parse_summary(raw)
            except MalformedJson as exc:
                failure = exc
                log.warning("summary parse failed (%s); retrying", exc)
        raise failure  # type: ignore[misc]


def _stitch(left: list[ItemResult], right: list[ItemResult], mid: int) -> list[ItemResult]:
    merged = list(left)
    merged.extend(ItemResult(mid + r.item_index, r.payload, r.error) for r in right)
    return merged
