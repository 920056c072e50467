"""Rule-based prefilter: drop platform/runtime packages before any LLM work."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Union

from .candidates import ApiSignature, Candidate, CandidateKind, CandidateSet


class EmptyWhitelist(Exception):
    """The whitelist file parsed to zero prefixes; filtering would be a no-op."""


@dataclass(frozen=True)
class Whitelist:
    """Package-prefix deny list for obviously non-AI platform components.

    Prefixes are stored lowercase without a trailing dot; matching is
    segment-aware, so prefix "java" covers "java.lang" but never "javax".
    """

    prefixes: frozenset[str]
    version: str = "0"

    def matches(self, dotted: str) -> bool:
        lowered = dotted.lower()
        return any(lowered == p or lowered.startswith(p + ".") for p in self.prefixes)

    @classmethod
    def empty(cls) -> "Whitelist":
        return cls(prefixes=frozenset(), version="empty")


_VERSION_COMMENT = re.compile(r"^#\s*version\s*:\s*(\S+)", re.IGNORECASE)


def parse_whitelist(text: str) -> Whitelist:
    version = "0"
    prefixes: set[str] = set()
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            m = _VERSION_COMMENT.match(stripped)
            if m:
                version = m.group(1)
            continue
        prefixes.add(stripped.lower().rstrip("."))
    prefixes.discard("")
    if not prefixes:
        raise EmptyWhitelist("no prefixes parsed; pipeline may proceed unfiltered")
    return Whitelist(prefixes=frozenset(prefixes), version=version)


def load_whitelist(path: Union[str, Path, None] = None) -> Whitelist:
    """Load a whitelist file (one prefix per line, '#' comments, UTF-8).

    Without a path, the packaged default list is used.

    Raises:
        EmptyWhitelist: the file parsed to zero prefixes. Callers that want
            to continue unfiltered should catch this and use Whitelist.empty().
    """
    if path is None:
        text = resources.files("aidiscover.data").joinpath("whitelist.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return parse_whitelist(text)


def _drop(candidate: Candidate, wl: Whitelist) -> bool:
    if candidate.kind == CandidateKind.PACKAGE:
        return wl.matches(candidate.text)
    if candidate.kind == CandidateKind.API:
        class_name = ApiSignature.class_name_of(candidate.text)
        return class_name is not None and wl.matches(class_name)
    # URL and model-asset candidates are never whitelisted away.
    return False


def apply_whitelist(cand_set: CandidateSet, wl: Whitelist) -> CandidateSet:
    """Drop Package/Api candidates under any whitelisted prefix.

    Idempotent; preserves candidate order, occurrences, and every candidate
    of other kinds.
    """
    return CandidateSet(
        app_id=cand_set.app_id,
        candidates=[c for c in cand_set.candidates if not _drop(c, wl)],
        obfuscation=cand_set.obfuscation,
        warnings=list(cand_set.warnings),
    )
