"""ELF shared-object scanning for embedded endpoint URLs.

Walks the section header table (32/64-bit, either endianness) and harvests
printable byte runs from data-carrying sections. Corrupt section headers are
skipped, not fatal; an ELF without a usable section table degrades to a
whole-file scan so stripped or packed libraries still yield strings.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

ELF_MAGIC = b"\x7fELF"

SHT_PROGBITS = 1

# 8 bytes is the shortest run that can still hold a URL prefix.
MIN_RUN_LENGTH = 8

_PRINTABLE_RUN = re.compile(rb"[\x20-\x7e]{%d,}" % MIN_RUN_LENGTH)


class BadElfMagic(Exception):
    """Input does not start with the ELF magic number."""


@dataclass
class ElfScan:
    """Printable runs harvested from one shared object."""

    runs: list[str]
    warnings: list[str] = field(default_factory=list)


def _section_table(data: bytes) -> list[tuple[int, int, int]]:
    """Return (sh_type, sh_offset, sh_size) per section, or raise ValueError."""
    ei_class = data[4]  # 1 = 32-bit, 2 = 64-bit
    ei_data = data[5]  # 1 = LSB, 2 = MSB
    if ei_class not in (1, 2) or ei_data not in (1, 2):
        raise ValueError(f"unsupported ELF ident class={ei_class} data={ei_data}")
    end = "<" if ei_data == 1 else ">"

    if ei_class == 2:
        e_shoff = struct.unpack_from(end + "Q", data, 0x28)[0]
        e_shentsize = struct.unpack_from(end + "H", data, 0x3A)[0]
        e_shnum = struct.unpack_from(end + "H", data, 0x3C)[0]
        # sh_type @ 4, sh_offset @ 24, sh_size @ 32
        def row(base: int) -> tuple[int, int, int]:
            sh_type = struct.unpack_from(end + "I", data, base + 4)[0]
            sh_offset, sh_size = struct.unpack_from(end + "QQ", data, base + 24)
            return sh_type, sh_offset, sh_size
    else:
        e_shoff = struct.unpack_from(end + "I", data, 0x20)[0]
        e_shentsize = struct.unpack_from(end + "H", data, 0x2E)[0]
        e_shnum = struct.unpack_from(end + "H", data, 0x30)[0]
        # sh_type @ 4, sh_offset @ 16, sh_size @ 20
        def row(base: int) -> tuple[int, int, int]:
            sh_type = struct.unpack_from(end + "I", data, base + 4)[0]
            sh_offset, sh_size = struct.unpack_from(end + "II", data, base + 16)
            return sh_type, sh_offset, sh_size

    if e_shoff == 0 or e_shnum == 0:
        raise ValueError("no section header table")
    if e_shentsize < (64 if ei_class == 2 else 40):
        raise ValueError(f"implausible e_shentsize {e_shentsize}")
    if e_shoff + e_shnum * e_shentsize > len(data):
        raise ValueError("section header table out of bounds")
    return [row(e_shoff + i * e_shentsize) for i in range(e_shnum)]


def _printable_runs(blob: bytes) -> list[str]:
    return [m.group(0).decode("ascii") for m in _PRINTABLE_RUN.finditer(blob)]


def scan_elf_strings(data: bytes) -> ElfScan:
    """Collect printable runs from an ELF image's data-carrying sections.

    Raises:
        BadElfMagic: input is not ELF at all.
    """
    if data[:4] != ELF_MAGIC:
        raise BadElfMagic("missing ELF magic")
    if len(data) < 0x40:
        return ElfScan(runs=[], warnings=["header shorter than minimum, scanned nothing"])

    warnings: list[str] = []
    try:
        sections = _section_table(data)
    except (ValueError, struct.error) as exc:
        warnings.append(f"section table unusable ({exc}); falling back to whole-file scan")
        return ElfScan(runs=_printable_runs(data), warnings=warnings)

    runs: list[str] = []
    usable = 0
    for index, (sh_type, sh_offset, sh_size) in enumerate(sections):
        if sh_type != SHT_PROGBITS or sh_size == 0:
            continue
        if sh_offset + sh_size > len(data):
            warnings.append(f"section {index} data out of bounds, skipped")
            continue
        usable += 1
        runs.extend(_printable_runs(data[sh_offset : sh_offset + sh_size]))

    if usable == 0:
        warnings.append("no usable data sections; falling back to whole-file scan")
        runs = _printable_runs(data)
    return ElfScan(runs=runs, warnings=warnings)
