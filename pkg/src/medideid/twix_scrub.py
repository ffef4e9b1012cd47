"""Length-preserving PHI scrubbing for Siemens twix raw-data files.

A twix file is treated as an opaque container: raw k-space samples interleaved
with embedded ASCII protocol text. Every readable text region is scanned for
known identifying keys, and their values are overwritten byte-for-byte, so
the file keeps its size and all internal offsets stay valid.

Two value shapes are recognised::

    tPatientName = "MUSTERMANN"            # key = value (MeasYaps / ASCCONV)
    <ParamString."PatientID">  { "123" }   # XProtocol parameter blocks

VD/VE multi-measurement files additionally store the patient name in the
fixed-size entry table at the start of the file; that field is scrubbed too.
"""

from __future__ import annotations

import enum
import re
import struct
from dataclasses import dataclass, field

import numpy as np

MIN_REGION = 64
_REGION_RE = re.compile(rb"[\x20-\x7e\t\r\n]{%d,}" % MIN_REGION)


class Kind(str, enum.Enum):
    QUOTED_TEXT = "quoted-text"
    NUMERIC = "numeric"
    BARE_TOKEN = "bare-token"


@dataclass(frozen=True)
class PhiFieldSpec:
    key: str
    kind: Kind = Kind.QUOTED_TEXT

    def __post_init__(self):
        if not self.key.isascii() or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", self.key):
            raise ValueError(f"PHI key must be a plain ASCII identifier: {self.key!r}")
        object.__setattr__(self, "kind", Kind(self.kind))

    @property
    def replacement_char(self) -> bytes:
        return b"0" if self.kind is Kind.NUMERIC else b"x"


DEFAULT_SPECS = (
    PhiFieldSpec("tPatientName"),
    PhiFieldSpec("PatientName"),
    PhiFieldSpec("PatientsName"),
    PhiFieldSpec("PatientID", Kind.NUMERIC),
    PhiFieldSpec("PatientBirthDay", Kind.NUMERIC),
    PhiFieldSpec("tPerfPhysiciansName"),
    PhiFieldSpec("ReferringPhysician"),
    PhiFieldSpec("InstitutionName"),
)

# the patient name slot of a VD/VE MrParcRaidFileEntry
RAID_NAME_SPEC = PhiFieldSpec("RaidPatientName")


@dataclass(frozen=True)
class PhiMatch:
    spec: PhiFieldSpec
    offset: int
    length: int
    section: int  # index of the text region; -1 for the raid entry table

    @property
    def end(self) -> int:
        return self.offset + self.length


class TwixScrubError(ValueError):
    pass


class TwixVerificationError(TwixScrubError):
    def __init__(self, report: "ScrubReport"):
        super().__init__("; ".join(f"{o}: {why}" for o, why in report.problems))
        self.report = report


def ascii_regions(data: bytes) -> list[tuple[int, int]]:
    return [(m.start(), m.end()) for m in _REGION_RE.finditer(data)]


def _value_patterns(spec: PhiFieldSpec) -> list[re.Pattern]:
    key = re.escape(spec.key.encode("ascii"))
    value = rb'(?:"+(?P<q>[^"\r\n]*?)"+|(?P<b>[^\s"{}<>;]+))'
    return [
        re.compile(rb"(?<![A-Za-z0-9_.\"])" + key + rb"[ \t]*=[ \t]*" + value),
        re.compile(rb'<Param\w*\."' + key + rb'">\s*\{\s*' + value),
    ]


def _raid_entries(data: bytes) -> list[tuple[int, int]]:
    """Patient-name spans of a VD/VE raid header, if the file has one."""
    if len(data) < 8 + 64 * 152:
        return []
    first, count = struct.unpack_from("<II", data, 0)
    if first != 0 or not 1 <= count <= 64:
        return []
    spans = []
    for i in range(count):
        base = 8 + i * 152
        _mid, _fid, off, length = struct.unpack_from("<IIQQ", data, base)
        if off > len(data) or off + length > len(data) + 2**20:
            return []
        name = data[base + 24:base + 88]
        n = name.find(b"\x00")
        n = 64 if n < 0 else n
        if n and all(0x20 <= c < 0x7F for c in name[:n]):
            spans.append((base + 24, n))
    return spans


def locate_phi_fields(data: bytes, specs=DEFAULT_SPECS) -> list[PhiMatch]:
    """Find every value of every key across all text regions, sorted by offset."""
    specs = tuple(specs)
    if not specs:
        raise ValueError("need at least one field spec")
    data = bytes(data)
    found: dict[int, PhiMatch] = {}
    for section, (start, end) in enumerate(ascii_regions(data)):
        region = data[start:end]
        for spec in specs:
            for pattern in _value_patterns(spec):
                for m in pattern.finditer(region):
                    grp = "q" if m.group("q") is not None else "b"
                    s, e = m.span(grp)
                    if e > s:
                        found.setdefault(start + s, PhiMatch(spec, start + s, e - s, section))
    for offset, length in _raid_entries(data):
        found.setdefault(offset, PhiMatch(RAID_NAME_SPEC, offset, length, -1))
    matches = sorted(found.values(), key=lambda m: m.offset)
    _check_disjoint(matches)
    return matches


def _check_disjoint(matches):
    for a, b in zip(matches, matches[1:]):
        if b.offset < a.end:
            raise TwixScrubError(f"overlapping match spans at offsets {a.offset} and {b.offset}")


def scrub_in_place(data: bytes, matches) -> bytes:
    """Overwrite each match span with its replacement character."""
    matches = sorted(matches, key=lambda m: m.offset)
    _check_disjoint(matches)
    out = bytearray(data)
    for m in matches:
        if m.end > len(out):
            raise TwixScrubError(f"match at {m.offset} runs past end of data")
        out[m.offset:m.end] = m.spec.replacement_char * m.length
    return bytes(out)


@dataclass
class ScrubReport:
    matches: int = 0
    problems: list[tuple[int, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.problems

    def check(self) -> "ScrubReport":
        if self.problems:
            raise TwixVerificationError(self)
        return self


def verify_scrub(original: bytes, scrubbed: bytes, specs=DEFAULT_SPECS) -> ScrubReport:
    """Check length, full replacement of every value, and diff confinement."""
    report = ScrubReport()
    if len(original) != len(scrubbed):
        report.problems.append((min(len(original), len(scrubbed)),
                                f"length changed {len(original)} -> {len(scrubbed)}"))
        return report
    spans = locate_phi_fields(original, specs)
    report.matches = len(spans)
    for m in locate_phi_fields(scrubbed, specs):
        value = scrubbed[m.offset:m.end]
        bad = [i for i, c in enumerate(value) if c != m.spec.replacement_char[0]]
        for i in bad:
            report.problems.append((m.offset + i, f"{m.spec.key} value not fully replaced"))
    inside = np.zeros(len(original), dtype=bool)
    for m in spans:
        inside[m.offset:m.end] = True
    a = np.frombuffer(original, dtype=np.uint8)
    b = np.frombuffer(scrubbed, dtype=np.uint8)
    for off in np.flatnonzero((a != b) & ~inside)[:100]:
        report.problems.append((int(off), "byte changed outside any PHI span"))
    report.problems.sort()
    return report


def scrub_twix(data: bytes, specs=DEFAULT_SPECS) -> tuple[bytes, list[PhiMatch], ScrubReport]:
    matches = locate_phi_fields(data, specs)
    out = scrub_in_place(data, matches)
    return out, matches, verify_scrub(data, out, specs).check()


def specs_from_config(entries) -> tuple[PhiFieldSpec, ...]:
    """``[{"key": ..., "kind": ...}, "Key", ...]`` -> specs appended to the defaults."""
    extra = []
    for e in entries or ():
        if isinstance(e, str):
            extra.append(PhiFieldSpec(e))
        else:
            extra.append(PhiFieldSpec(e["key"], Kind(e.get("kind", "quoted-text"))))
    known = {s.key for s in DEFAULT_SPECS}
    return DEFAULT_SPECS + tuple(s for s in extra if s.key not in known)
