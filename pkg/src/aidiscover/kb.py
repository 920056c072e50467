"""Append-only verdict store shared across apps and runs.

One JSONL log holds both the AI side (verdict, capability analysis, taxonomy
labels) and the non-AI side; separation is logical, keyed by verdict. Replay
is last-write-wins per key, so a revised verdict simply appends.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Union

log = logging.getLogger(__name__)

VERDICT_AI = "AI"
VERDICT_NON_AI = "NonAI"

_WS = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Lowercase and collapse runs of whitespace; idempotent."""
    return _WS.sub(" ", text.strip().lower())


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class KbKey:
    """Candidate identity across apps: kind plus normalized text."""

    kind: str
    normalized_text: str

    @classmethod
    def make(cls, kind: str, text: str) -> "KbKey":
        return cls(kind=kind, normalized_text=normalize_text(text))


@dataclass(frozen=True)
class KbRecord:
    """One persisted verdict with optional analysis and taxonomy labels."""

    key: KbKey
    verdict: str
    analysis: Optional[str] = None
    domain: Optional[str] = None
    task: Optional[str] = None
    model_id: str = "unknown"
    created_at: Optional[datetime] = None

    def validate(self) -> None:
        if self.verdict not in (VERDICT_AI, VERDICT_NON_AI):
            raise ValueError(f"verdict must be AI or NonAI, got {self.verdict!r}")
        if self.verdict == VERDICT_AI and not (self.analysis or "").strip():
            raise ValueError("AI records require a non-empty analysis")
        if self.verdict == VERDICT_NON_AI and (self.domain or self.task):
            raise ValueError("NonAI records must not carry domain/task labels")

    def to_line(self) -> str:
        payload = {
            "kind": self.key.kind,
            "text": self.key.normalized_text,
            "verdict": self.verdict,
            "analysis": self.analysis,
            "domain": self.domain,
            "task": self.task,
            "model_id": self.model_id,
            "created_at": (self.created_at or utc_now()).isoformat(),
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_line(cls, line: str) -> "KbRecord":
        payload = json.loads(line)
        record = cls(
            key=KbKey(kind=payload["kind"], normalized_text=payload["text"]),
            verdict=payload["verdict"],
            analysis=payload.get("analysis"),
            domain=payload.get("domain"),
            task=payload.get("task"),
            model_id=payload.get("model_id", "unknown"),
            created_at=datetime.fromisoformat(payload["created_at"]),
        )
        record.validate()
        return record


class KnowledgeBase:
    """Replayed view of the record log plus a serialized append channel.

    Reads are lock-free over an immutable-per-key dict; writes funnel through
    one lock so concurrent workers can share a single instance.
    """

    def __init__(self, path: Optional[Path] = None, clock: Callable[[], datetime] = utc_now):
        self.path = Path(path) if path is not None else None
        self.clock = clock
        self.records: dict[KbKey, KbRecord] = {}
        self.corrupt_lines = 0
        self.degraded = False
        self._write_lock = threading.Lock()

    def lookup(self, key: KbKey) -> Optional[KbRecord]:
        """Latest record for a key, or None. Never touches any backend."""
        return self.records.get(key)

    def insert(self, record: KbRecord) -> KbRecord:
        """Validate, stamp, append durably, and make visible to lookup.

        On storage failure the record stays visible in memory and the store
        flips to degraded mode rather than failing the caller.
        """
        record.validate()
        if record.created_at is None:
            record = replace(record, created_at=self.clock())
        with self._write_lock:
            self.records[record.key] = record
            if self.path is not None:
                try:
                    with open(self.path, "a", encoding="utf-8") as fh:
                        fh.write(record.to_line() + "\n")
                except OSError as exc:
                    self.degraded = True
                    log.warning("KB append failed, continuing uncached: %s", exc)
        return record


def kb_sync(path: Union[str, Path, None]) -> KnowledgeBase:
    """Load a knowledge base by replaying its log; create the file lazily.

    Malformed lines are skipped with a warning and counted, never fatal.
    A None path yields a purely in-memory store.
    """
    kb = KnowledgeBase(path=Path(path) if path is not None else None)
    if kb.path is None or not kb.path.exists():
        return kb
    with open(kb.path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = KbRecord.from_line(line)
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                kb.corrupt_lines += 1
                log.warning("%s:%d: skipping corrupt KB record (%s)", kb.path, lineno, exc)
                continue
            kb.records[record.key] = record  # replay order = last write wins
    return kb


class SummaryCache:
    """Sidecar JSONL cache for app-level summary generations.

    Keyed by an input digest so a changed component set always regenerates.
    Same append/replay discipline as the main log, separate file.
    """

    def __init__(self, path: Optional[Path]):
        self.path = Path(path) if path is not None else None
        self.entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        payload = json.loads(line)
                        self.entries[payload["digest"]] = payload["value"]
                    except (json.JSONDecodeError, KeyError):
                        log.warning("%s: skipping corrupt summary-cache line", self.path)

    def get(self, digest: str) -> Optional[dict]:
        return self.entries.get(digest)

    def put(self, digest: str, value: dict) -> None:
        with self._lock:
            self.entries[digest] = value
            if self.path is not None:
                try:
                    with open(self.path, "a", encoding="utf-8") as fh:
                        fh.write(json.dumps({"digest": digest, "value": value}, sort_keys=True) + "\n")
                except OSError as exc:
                    log.warning("summary cache append failed: %s", exc)
