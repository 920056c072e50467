"""Candidate extraction: packages, API signatures, endpoint URLs, model assets.

Each extractor is a pure function over bytes or names; :func:`extract_candidates`
merges all per-entry results into one deduplicated, deterministically ordered
set per app, together with name-obfuscation statistics.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Union
from urllib.parse import urlsplit

from .apk import ApkArchive, EntryKind
from .dex import DexSymbols, MethodRef, parse_dex
from .native import scan_elf_strings

log = logging.getLogger(__name__)

# Scheme, host that neither starts nor ends with a separator, optional port
# and path. Path charset excludes whitespace, quotes, and angle brackets so a
# match never drags in surrounding prose or control bytes.
URL_RE = re.compile(
    r"https?://[A-Za-z0-9](?:[A-Za-z0-9.-]*[A-Za-z0-9])?(?::\d{1,5})?(?:/[^\s\"'<>`\\]*)?"
)

_CONTROL_CHARS = re.compile(r"[\x00-\x1f\x7f]")

DEFAULT_MODEL_SUFFIXES = (
    ".tflite",
    ".lite",
    ".caffemodel",
    ".model",
    ".pb",
    ".onnx",
    ".mnn",
    ".param",
    ".ms",
    ".pt",
    ".nb",
)

# Obfuscators rename to one- and two-letter identifiers.
OBFUSCATED_SEGMENT_LEN = 2


class CandidateKind:
    """Closed set of candidate categories, in canonical report order."""

    PACKAGE = "Package"
    API = "Api"
    HTTPS_REQUEST = "HttpsRequest"
    MODEL_ASSET = "ModelAsset"
    OTHER = "Other"

    ALL = (PACKAGE, API, HTTPS_REQUEST, MODEL_ASSET, OTHER)

    _ORDER = {k: i for i, k in enumerate(ALL)}

    @classmethod
    def sort_key(cls, kind: str) -> int:
        return cls._ORDER.get(kind, len(cls.ALL))


@dataclass(frozen=True)
class ApiSignature:
    """A method reference with class, return type, name, and parameter types."""

    class_name: str
    return_type: str
    method_name: str
    param_types: tuple[str, ...] = ()

    def render(self) -> str:
        params = ",".join(self.param_types)
        return f"<{self.class_name}: {self.return_type} {self.method_name}({params})>"

    @classmethod
    def from_method(cls, method: MethodRef) -> "ApiSignature":
        return cls(
            class_name=method.class_name,
            return_type=method.return_type,
            method_name=method.name,
            param_types=tuple(method.param_types),
        )

    @staticmethod
    def class_name_of(rendered: str) -> Optional[str]:
        """Recover the class name from a rendered signature, if well formed."""
        m = re.match(r"^<([^:>]+):", rendered)
        return m.group(1).strip() if m else None


@dataclass
class Candidate:
    """One extracted component: category, canonical text, origin, multiplicity."""

    kind: str
    text: str
    source: str
    occurrences: int = 1

    def key(self) -> tuple[str, str]:
        return (self.kind, self.text)


@dataclass
class ObfuscationStats:
    """Share of shortened class file names and package directory names."""

    file_name_ratio: float = 0.0
    dir_name_ratio: float = 0.0
    total_classes: int = 0


@dataclass
class CandidateSet:
    """All candidates of one app, deduplicated and deterministically ordered."""

    app_id: str
    candidates: list[Candidate] = field(default_factory=list)
    obfuscation: ObfuscationStats = field(default_factory=ObfuscationStats)
    warnings: list[str] = field(default_factory=list)


def find_urls(text: str) -> list[str]:
    """All URL substrings of one string, in order of appearance."""
    return [m.group(0) for m in URL_RE.finditer(text)]


def _is_clean_text(text: str) -> bool:
    return bool(text) and text == text.strip() and not _CONTROL_CHARS.search(text)


def _valid_url(text: str) -> bool:
    try:
        parts = urlsplit(text)
    except ValueError:
        return False
    return parts.scheme in ("http", "https") and bool(parts.netloc)


def package_of(class_name: str) -> Optional[str]:
    """Dotted package prefix of a class name, or None for the default package."""
    head, sep, _ = class_name.rpartition(".")
    return head if sep else None


def extract_dex_candidates(data: bytes, source: str = "classes.dex") -> list[Candidate]:
    """Candidates from one .dex file: packages, API signatures, URL strings.

    Raises BadDexMagic / TruncatedDex from the underlying parser.
    """
    return candidates_from_symbols(parse_dex(data), source)


def candidates_from_symbols(symbols: DexSymbols, source: str) -> list[Candidate]:
    out: list[Candidate] = []

    packages: dict[str, int] = {}
    for class_name in symbols.class_names:
        pkg = package_of(class_name)
        if pkg:
            packages[pkg] = packages.get(pkg, 0) + 1
    for pkg, count in packages.items():
        if _is_clean_text(pkg):
            out.append(Candidate(CandidateKind.PACKAGE, pkg, source, occurrences=count))

    apis: dict[str, int] = {}
    for method in symbols.methods:
        rendered = ApiSignature.from_method(method).render()
        apis[rendered] = apis.get(rendered, 0) + 1
    for rendered, count in apis.items():
        if _is_clean_text(rendered):
            out.append(Candidate(CandidateKind.API, rendered, source, occurrences=count))

    urls: dict[str, int] = {}
    for string in symbols.strings:
        for url in find_urls(string):
            urls[url] = urls.get(url, 0) + 1
    for url, count in urls.items():
        if _is_clean_text(url) and _valid_url(url):
            out.append(Candidate(CandidateKind.HTTPS_REQUEST, url, source, occurrences=count))

    return out


def extract_native_candidates(data: bytes, source: str = "") -> list[Candidate]:
    """Endpoint URL candidates from one ELF shared object.

    Raises BadElfMagic for non-ELF input. Corrupt sections only produce
    warnings inside the scan, never a failure.
    """
    scan = scan_elf_strings(data)
    for warning in scan.warnings:
        log.warning("%s: %s", source or "<elf>", warning)
    urls: dict[str, int] = {}
    for run in scan.runs:
        for url in find_urls(run):
            urls[url] = urls.get(url, 0) + 1
    return [
        Candidate(CandidateKind.HTTPS_REQUEST, url, source, occurrences=count)
        for url, count in urls.items()
        if _is_clean_text(url) and _valid_url(url)
    ]


def load_model_suffixes(path: Union[str, Path, None] = None) -> tuple[str, ...]:
    """Model-file suffix list: one suffix per line, '#' comments, UTF-8.

    Without a path, the packaged default list is used.
    """
    if path is None:
        text = resources.files("aidiscover.data").joinpath("model_suffixes.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    suffixes = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            suffixes.append(line if line.startswith(".") else "." + line)
    return tuple(dict.fromkeys(suffixes))


def extract_asset_candidates(
    entry_names: Iterable[str],
    model_suffixes: Optional[tuple[str, ...]] = None,
) -> list[Candidate]:
    """ModelAsset candidates among asset entries, by file suffix.

    A ".bin" asset only counts when a sibling in the same directory carries a
    recognized model suffix (paired weight/graph layouts). Non-model assets
    surface only in the odd case that their name embeds a URL, as Other.
    """
    suffixes = model_suffixes if model_suffixes is not None else DEFAULT_MODEL_SUFFIXES
    assets = [n for n in entry_names if n.startswith("assets/")]

    model_dirs = {
        n.rsplit("/", 1)[0] for n in assets if any(n.lower().endswith(s) for s in suffixes)
    }
    out: list[Candidate] = []
    for name in assets:
        lower = name.lower()
        if any(lower.endswith(s) for s in suffixes):
            out.append(Candidate(CandidateKind.MODEL_ASSET, name, name))
        elif lower.endswith(".bin") and name.rsplit("/", 1)[0] in model_dirs:
            out.append(Candidate(CandidateKind.MODEL_ASSET, name, name))
        elif find_urls(name):
            out.append(Candidate(CandidateKind.OTHER, name, name))
    return out


def _segments(dotted: str) -> list[str]:
    return [s for s in dotted.split(".") if s]


def measure_obfuscation(class_names: Iterable[str]) -> ObfuscationStats:
    """Ratio of shortened class file names and package directory names.

    A class file name counts as obfuscated when its final segment is at most
    two characters. A package path counts when it has three or more segments
    and every segment past the first two is at most two characters.
    """
    distinct_classes = sorted(set(class_names))
    if not distinct_classes:
        return ObfuscationStats()

    obfuscated_files = 0
    packages: set[str] = set()
    for name in distinct_classes:
        segs = _segments(name)
        if not segs:
            continue
        if len(segs[-1]) <= OBFUSCATED_SEGMENT_LEN:
            obfuscated_files += 1
        pkg = package_of(name)
        if pkg:
            packages.add(pkg)

    obfuscated_dirs = 0
    for pkg in packages:
        segs = _segments(pkg)
        if len(segs) >= 3 and all(len(s) <= OBFUSCATED_SEGMENT_LEN for s in segs[2:]):
            obfuscated_dirs += 1

    return ObfuscationStats(
        file_name_ratio=obfuscated_files / len(distinct_classes),
        dir_name_ratio=obfuscated_dirs / len(packages) if packages else 0.0,
        total_classes=len(distinct_classes),
    )


def merge_candidates(groups: Iterable[list[Candidate]]) -> list[Candidate]:
    """Union per-entry candidate lists: sum occurrences, keep first source,
    order by (kind, text)."""
    merged: dict[tuple[str, str], Candidate] = {}
    for group in groups:
        for cand in group:
            prior = merged.get(cand.key())
            if prior is None:
                merged[cand.key()] = Candidate(cand.kind, cand.text, cand.source, cand.occurrences)
            else:
                prior.occurrences += cand.occurrences
    return sorted(merged.values(), key=lambda c: (CandidateKind.sort_key(c.kind), c.text))


def extract_candidates(
    archive: ApkArchive,
    app_id: str,
    model_suffixes: Optional[tuple[str, ...]] = None,
) -> CandidateSet:
    """Run every extractor over one opened APK and merge the results.

    A missing .dex is a warning, not a failure: native and asset extraction
    still run. Unparseable .dex or .so entries are skipped with a warning.
    """
    warnings: list[str] = []
    groups: list[list[Candidate]] = []
    defined_classes: list[str] = []

    dex_entries = archive.entries_of_kind(EntryKind.DEX_FILE)
    if not dex_entries:
        warnings.append("NoDexFound: archive has no classes*.dex entry")
    for entry in dex_entries:
        try:
            symbols = parse_dex(archive.read_bytes(entry))
        except Exception as exc:  # noqa: BLE001 - per-entry isolation
            warnings.append(f"{entry.name}: dex parse failed ({exc})")
            continue
        groups.append(candidates_from_symbols(symbols, entry.name))
        defined_classes.extend(symbols.defined_class_names)

    for entry in archive.entries_of_kind(EntryKind.NATIVE_LIB):
        try:
            groups.append(extract_native_candidates(archive.read_bytes(entry), entry.name))
        except Exception as exc:  # noqa: BLE001
            warnings.append(f"{entry.name}: native scan failed ({exc})")

    asset_names = [e.name for e in archive.entries_of_kind(EntryKind.ASSET)]
    groups.append(extract_asset_candidates(asset_names, model_suffixes))

    return CandidateSet(
        app_id=app_id,
        candidates=merge_candidates(groups),
        obfuscation=measure_obfuscation(defined_classes),
        warnings=warnings,
    )
