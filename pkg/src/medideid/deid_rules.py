"""Profile-driven DICOM metadata de-identification.

A profile maps tag patterns to one of six action codes. Profiles are plain
text::

    # comment
    name = my_site
    extends = basic
    default_action = K
    private_tags = remove-all
    date_shift_days = -30
    retain = retain_uids, clean_descriptors
    risk_groups = 0010, 0038
    0010,0030 = C
    60xx,3000 = X
    0019,0000-0019,FFFF = X

Patterns are exact (``GGGG,EEEE``), masked (``x`` digits) or inclusive
ranges. For a given tag, exact beats masked beats range beats the default.
"""

from __future__ import annotations

import datetime as dt
import enum
import hashlib
import hmac
import json
import re
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dicom_core import (
    BINARY_VRS, DataSet, Element, PIXEL_DATA, Tag, encode_value, make_element,
    replace_element,
)
from .dictionary import BASIC_ACTIONS, BASIC_MASKED, VR_DICT

DUMMY_TEXT = "ANONYMIZED"
DEFAULT_UID_ROOT = "2.25"
DEID_MARKER_TAGS = (Tag(0x0012, 0x0062), Tag(0x0012, 0x0063))
# set once dates are shifted, so a second pass does not shift them again
TEMPORAL_MODIFIED = Tag(0x0028, 0x0303)


class ConfigError(ValueError):
    pass


class UidCollisionError(RuntimeError):
    pass


class ActionCode(str, enum.Enum):
    DUMMY = "D"
    ZERO = "Z"
    REMOVE = "X"
    KEEP = "K"
    CLEAN = "C"
    UID = "U"


class PrivateTagPolicy(str, enum.Enum):
    REMOVE_ALL = "remove-all"
    KEEP = "keep"


# ---------------------------------------------------------------------------
# patterns


@dataclass(frozen=True)
class TagPattern:
    text: str
    kind: str  # exact | masked | range
    lo: int = 0
    hi: int = 0
    mask: int = 0
    want: int = 0
    wildcards: int = 0

    @classmethod
    def parse(cls, text: str) -> "TagPattern":
        t = text.strip().strip("()").replace(" ", "").upper()
        if "-" in t:
            a, b = (cls.parse(p) for p in t.split("-"))
            if a.kind != "exact" or b.kind != "exact" or a.lo > b.lo:
                raise ConfigError(f"bad tag range {text!r}")
            return cls(t, "range", lo=a.lo, hi=b.lo)
        m = re.fullmatch(r"([0-9A-FX]{4}),?([0-9A-FX]{4})", t)
        if not m:
            raise ConfigError(f"bad tag pattern {text!r}")
        digits = m.group(1) + m.group(2)
        if "X" not in digits:
            v = int(digits, 16)
            return cls(f"{m.group(1)},{m.group(2)}", "exact", lo=v, hi=v)
        mask = int("".join("0" if c == "X" else "F" for c in digits), 16)
        want = int(digits.replace("X", "0"), 16)
        return cls(f"{m.group(1)},{m.group(2)}".replace("X", "x"), "masked",
                   mask=mask, want=want, wildcards=digits.count("X"))

    def matches(self, value: int) -> bool:
        if self.kind == "masked":
            return value & self.mask == self.want
        return self.lo <= value <= self.hi

    @property
    def specificity(self) -> tuple:
        # larger sorts first
        rank = {"exact": 2, "masked": 1, "range": 0}[self.kind]
        if self.kind == "masked":
            return (rank, -self.wildcards)
        return (rank, -(self.hi - self.lo))


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class DeidProfile:
    name: str
    entries: tuple = ()  # ((TagPattern, ActionCode), ...), later entries override earlier
    private_tag_policy: PrivateTagPolicy = PrivateTagPolicy.REMOVE_ALL
    date_shift_days: int = 0
    retain_options: frozenset = frozenset()
    default_action: ActionCode = ActionCode.KEEP
    risk_groups: frozenset = frozenset({0x0010, 0x0038, 0x4008})

    def __post_init__(self):
        exact = {p.lo: a for p, a in self.entries if p.kind == "exact"}
        object.__setattr__(self, "_exact", exact)
        object.__setattr__(self, "_masked", self._ordered("masked"))
        object.__setattr__(self, "_ranges", self._ordered("range"))

    def _ordered(self, kind: str) -> list:
        # most specific first; among equals the later definition wins
        indexed = [(i, p, a) for i, (p, a) in enumerate(self.entries) if p.kind == kind]
        indexed.sort(key=lambda t: (t[1].specificity, t[0]), reverse=True)
        return [(p, a) for _, p, a in indexed]

    def entry_map(self) -> dict:
        return {p.text: a for p, a in self.entries}


def _basic_entries():
    entries = [(TagPattern.parse(f"{g:04X},{e:04X}"), ActionCode(a))
               for (g, e), a in sorted(BASIC_ACTIONS.items())]
    entries += [(TagPattern.parse(p), ActionCode(a)) for p, a in BASIC_MASKED.items()]
    return entries


def _tags_with(action: str) -> list[str]:
    return [f"{g:04X},{e:04X}" for (g, e), a in sorted(BASIC_ACTIONS.items()) if a == action]


def _temporal_tags() -> list[str]:
    return [f"{g:04X},{e:04X}" for (g, e) in sorted(BASIC_ACTIONS)
            if VR_DICT.get((g, e)) in ("DA", "DT", "TM")]


# Retain/clean options: overrides layered on the basic table.
RETAIN_OPTIONS: dict[str, dict] = {
    "retain_safe_private": {"private_tags": "keep"},
    "retain_uids": {"entries": {t: "K" for t in _tags_with("U")}},
    "retain_device_identity": {"entries": {t: "K" for t in (
        "0018,1007", "0018,1000", "0018,1002", "0018,700A", "0018,1008", "0018,1005",
        "0018,1004", "0008,1010", "0020,3401", "0020,3404", "0040,0241", "0040,0242",
        "0040,0001", "0040,0010")}},
    "retain_institution_identity": {"entries": {t: "K" for t in (
        "0008,0080", "0008,0081", "0008,0082", "0008,1040")}},
    "retain_patient_characteristics": {"entries": {t: "K" for t in (
        "0010,1010", "0010,0040", "0010,1020", "0010,1030", "0010,2160", "0010,21A0",
        "0010,21C0", "0010,2203", "0038,0500", "0038,0050", "0010,2000", "0010,2110")}},
    "retain_long_full_dates": {"entries": {t: "K" for t in _temporal_tags()}},
    "retain_long_modified_dates": {"entries": {t: "C" for t in _temporal_tags()}},
    "clean_descriptors": {"entries": {t: "C" for t in (
        "0008,1030", "0008,103E", "0020,4000", "0018,4000", "0010,21B0", "0010,4000",
        "0032,4000", "0040,0254", "0040,0007", "0018,1030", "0018,1400", "0040,1400",
        "0040,2400", "0032,1060", "0008,1080", "0038,4000", "0040,0280", "0020,9158",
        "0028,4000", "0008,4000", "4000,4000")}},
    "clean_structured_content": {"entries": {"0040,A730": "C"}},
    "clean_graphics": {"entries": {"0070,0001": "C", "60xx,3000": "C", "60xx,4000": "C"}},
}


def builtin_profile_names() -> list[str]:
    return ["basic"] + sorted(RETAIN_OPTIONS)


def builtin_profile(name: str) -> DeidProfile:
    if name == "basic":
        return DeidProfile("basic", tuple(_basic_entries()))
    if name not in RETAIN_OPTIONS:
        raise ConfigError(f"unknown built-in profile {name!r}")
    return _with_options(builtin_profile("basic"), [name], name=name)


def _with_options(base: DeidProfile, options, name: str) -> DeidProfile:
    entries = list(base.entries)
    policy = base.private_tag_policy
    for opt in options:
        if opt not in RETAIN_OPTIONS:
            raise ConfigError(f"unknown retain option {opt!r}")
        spec = RETAIN_OPTIONS[opt]
        entries = _override(entries, spec.get("entries", {}))
        if "private_tags" in spec:
            policy = PrivateTagPolicy(spec["private_tags"])
    return replace(base, name=name, entries=tuple(entries), private_tag_policy=policy,
                   retain_options=base.retain_options | frozenset(options))


def _override(entries, new: dict):
    new_pairs = [(TagPattern.parse(t), ActionCode(a)) for t, a in new.items()]
    replaced = {p.text for p, _ in new_pairs}
    return [(p, a) for p, a in entries if p.text not in replaced] + new_pairs


_HEADER_KEYS = {"name", "extends", "default_action", "private_tags", "date_shift_days",
                "retain", "risk_groups"}


def load_profile(config_text: str | None = None, *, name: str | None = None) -> DeidProfile:
    """Build a profile from profile-file text, or a built-in by ``name``.

    With no ``extends`` header the file stands alone (default action K, no
    entries besides its own).
    """
    if config_text is None:
        if name is None:
            raise ConfigError("need profile text or a built-in name")
        return builtin_profile(name)

    header: dict[str, str] = {}
    own: dict[str, tuple[ActionCode, int]] = {}
    for lineno, raw in enumerate(config_text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.lower() in _HEADER_KEYS:
            header[key.lower()] = value
            continue
        pattern = TagPattern.parse(key)
        letter = value.upper()
        if letter not in {c.value for c in ActionCode}:
            raise ConfigError(f"line {lineno}: unknown action {value!r}")
        prev = own.get(pattern.text)
        if prev is not None and prev[0] != ActionCode(letter):
            raise ConfigError(f"line {lineno}: {pattern.text} already set to {prev[0].value} "
                              f"on line {prev[1]}")
        own[pattern.text] = (ActionCode(letter), lineno)

    base_name = header.get("extends")
    if base_name:
        base = builtin_profile(base_name)
    else:
        base = DeidProfile(header.get("name", "custom"))
    options = [o.strip() for o in header.get("retain", "").split(",") if o.strip()]
    profile = _with_options(base, options, name=header.get("name", base.name))
    entries = _override(list(profile.entries), {t: a.value for t, (a, _) in own.items()})
    try:
        changes = dict(entries=tuple(entries))
        if "default_action" in header:
            changes["default_action"] = ActionCode(header["default_action"].upper())
        if "private_tags" in header:
            changes["private_tag_policy"] = PrivateTagPolicy(header["private_tags"].lower())
        if "date_shift_days" in header:
            changes["date_shift_days"] = int(header["date_shift_days"])
        if "risk_groups" in header:
            changes["risk_groups"] = frozenset(
                int(g, 16) for g in header["risk_groups"].split(",") if g.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return replace(profile, **changes)


def load_profile_file(path_or_name: str) -> DeidProfile:
    """Resolve a CLI/config profile reference: a built-in name or a file path."""
    if path_or_name in builtin_profile_names():
        return builtin_profile(path_or_name)
    path = Path(path_or_name)
    if not path.is_file():
        raise ConfigError(f"no built-in profile or profile file named {path_or_name!r}")
    return load_profile(path.read_text(), name=path.stem)


def action_for_tag(profile: DeidProfile, tag) -> ActionCode:
    tag = Tag(*tag)
    if tag == PIXEL_DATA:
        return ActionCode.KEEP
    if tag.is_private and profile.private_tag_policy is PrivateTagPolicy.REMOVE_ALL:
        return ActionCode.REMOVE
    value = (tag.group << 16) | tag.element
    if value in profile._exact:
        return profile._exact[value]
    for pattern, action in profile._masked:
        if pattern.matches(value):
            return action
    for pattern, action in profile._ranges:
        if pattern.matches(value):
            return action
    if tag.group in profile.risk_groups:
        return ActionCode.REMOVE
    return profile.default_action


# ---------------------------------------------------------------------------
# UID remapping


class UidMap:
    """Keyed, cached, injective UID replacement.

    Replacements are ``root + "." + decimal(HMAC-SHA256(key, uid)[:16])``,
    cut to 64 characters. The cache is guarded for concurrent use.
    """

    def __init__(self, key: bytes, root: str = DEFAULT_UID_ROOT, cache: dict | None = None):
        if not re.fullmatch(r"[0-9]+(\.[0-9]+)*", root) or len(root) > 40:
            raise ConfigError(f"invalid UID root {root!r}")
        self.key = bytes(key)
        self.root = root
        self.cache: dict[str, str] = {}
        self._reverse: dict[str, str] = {}
        self._lock = threading.Lock()
        for original, new in (cache or {}).items():
            self.cache[original] = new
            self._reverse[new] = original

    def _digest(self, uid: str) -> str:
        d = hmac.new(self.key, uid.encode("ascii"), hashlib.sha256).digest()
        digits = str(int.from_bytes(d[:16], "big"))
        return f"{self.root}.{digits}"[:64]

    def remap(self, uid: str) -> str:
        uid = uid.strip(" \x00")
        if not uid:
            return uid
        with self._lock:
            hit = self.cache.get(uid)
            if hit is not None:
                return hit
            if uid in self._reverse or uid.startswith(self.root + "."):
                # already one of ours: fixed point keeps re-application idempotent
                return uid
            new = self._digest(uid)
            other = self._reverse.get(new)
            if other is not None and other != uid:
                raise UidCollisionError(
                    f"UID replacement collision for {new}; rotate the UID key")
            self.cache[uid] = new
            self._reverse[new] = uid
            return new

    def save(self, path) -> None:
        with self._lock:
            data = {"root": self.root, "map": dict(sorted(self.cache.items()))}
        Path(path).write_text(json.dumps(data, indent=1))

    @classmethod
    def load(cls, path, key: bytes, root: str | None = None) -> "UidMap":
        p = Path(path)
        if not p.exists():
            return cls(key, root or DEFAULT_UID_ROOT)
        data = json.loads(p.read_text())
        return cls(key, root or data.get("root", DEFAULT_UID_ROOT), data.get("map", {}))


def remap_uid(uid_map: UidMap, uid: str) -> str:
    return uid_map.remap(uid)


# ---------------------------------------------------------------------------
# application


@dataclass(frozen=True)
class AuditEntry:
    path: str
    action: str
    disposition: str  # removed | replaced | kept
    note: str = ""


@dataclass
class AuditRecord:
    file_id: str
    profile: str
    timestamp: str = field(default_factory=lambda: dt.datetime.now(dt.timezone.utc).isoformat())
    entries: list[AuditEntry] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.entries:
            out[e.disposition] = out.get(e.disposition, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {"file_id": self.file_id, "profile": self.profile, "timestamp": self.timestamp,
                "entries": [[e.path, e.action, e.disposition, e.note] for e in self.entries]}


def dummy_value(vr: str, original: bytes = b"") -> bytes:
    if vr == "PN":
        return encode_value(vr, DUMMY_TEXT)
    if vr == "DA":
        return encode_value(vr, "19000101")
    if vr == "TM":
        return encode_value(vr, "000000")
    if vr == "DT":
        return encode_value(vr, "19000101000000")
    if vr == "AS":
        return encode_value(vr, "000Y")
    if vr in ("IS", "DS"):
        return encode_value(vr, "0")
    if vr in ("US", "SS", "UL", "SL", "FL", "FD", "AT") or vr in BINARY_VRS:
        return bytes(len(original))
    return encode_value(vr, DUMMY_TEXT)


def shift_dates(vr: str, text: str, days: int) -> str:
    """Shift each value of a DA or DT string by ``days``; TM carries no date.

    Raises ValueError for unparseable values.
    """
    out = []
    for v in text.split("\\"):
        if not v:
            out.append(v)
        elif vr == "TM":
            if not re.fullmatch(r"\d{2}(\d{2}(\d{2}(\.\d{1,6})?)?)?", v):
                raise ValueError(f"bad time {v!r}")
            out.append(v)
        else:
            if not re.fullmatch(r"\d{8}" if vr == "DA" else r"\d{8}[0-9.+-]*", v):
                raise ValueError(f"bad {vr} value {v!r}")
            d = dt.datetime.strptime(v[:8], "%Y%m%d").date() + dt.timedelta(days=days)
            out.append(f"{d.year:04d}{d.month:02d}{d.day:02d}" + v[8:])
    return "\\".join(out)


def _path_text(path: tuple) -> str:
    return "".join(f"[{p}]" if type(p) is int else str(Tag(*p)) for p in path)


class _Applier:
    def __init__(self, profile: DeidProfile, uid_map: UidMap, audit: AuditRecord,
                 shift_days: int = 0):
        self.profile = profile
        self.uid_map = uid_map
        self.audit = audit
        self.shift_days = shift_days
        self.shifted = False

    def log(self, path, action: ActionCode, disposition: str, note: str = ""):
        self.audit.entries.append(AuditEntry(_path_text(path), action.value, disposition, note))

    def elements(self, elements, path=()) -> list[Element]:
        out = []
        for e in elements:
            new = self.element(e, path + (e.tag,))
            if new is not None:
                out.append(new)
        return out

    def recurse(self, e: Element, path) -> Element:
        items = tuple(replace(it, elements=self.elements(it.elements, path + (i,)))
                      for i, it in enumerate(e.items))
        return replace(e, value=items)

    def element(self, e: Element, path) -> Element | None:
        action = action_for_tag(self.profile, e.tag)
        A = ActionCode
        if action is A.REMOVE:
            self.log(path, action, "removed")
            return None
        if action is A.KEEP:
            self.log(path, action, "kept")
            return self.recurse(e, path) if e.is_sequence else e
        if e.is_sequence:
            if action is A.ZERO:
                self.log(path, action, "replaced", "emptied sequence")
                return replace(e, value=())
            # D, C and U on a sequence clean its items in place
            self.log(path, action, "replaced", "items cleaned")
            return self.recurse(e, path)
        if action is A.ZERO:
            self.log(path, action, "replaced", "zero length")
            return replace(e, value=b"", undefined_length=False)
        if action is A.UID or (action is A.DUMMY and e.vr == "UI"):
            return self.uid(e, path, action)
        if action is A.DUMMY:
            self.log(path, action, "replaced", "dummy")
            return replace(e, value=dummy_value(e.vr, e.value), undefined_length=False)
        return self.clean(e, path)

    def uid(self, e: Element, path, action) -> Element:
        if e.vr != "UI":
            self.log(path, action, "replaced", f"non-UI VR {e.vr}, zero length")
            return replace(e, value=b"")
        new = "\\".join(self.uid_map.remap(u) for u in e.values)
        self.log(path, action, "replaced", "uid remapped")
        return replace(e, value=encode_value("UI", new))

    def clean(self, e: Element, path) -> Element:
        if e.vr in ("DA", "DT", "TM"):
            try:
                shifted = shift_dates(e.vr, e.text, self.shift_days)
            except ValueError:
                self.log(path, ActionCode.CLEAN, "replaced", "unparseable date, zero length")
                return replace(e, value=b"")
            self.shifted = self.shifted or (self.shift_days != 0 and e.vr != "TM")
            self.log(path, ActionCode.CLEAN, "replaced", f"shifted {self.shift_days:+d} days")
            return replace(e, value=encode_value(e.vr, shifted))
        if e.vr in BINARY_VRS:
            self.log(path, ActionCode.CLEAN, "replaced", "zero filled")
            return replace(e, value=bytes(len(e.value)))
        self.log(path, ActionCode.CLEAN, "replaced", "dummy")
        return replace(e, value=dummy_value(e.vr, e.value))


def apply_profile(ds: DataSet, profile: DeidProfile, uid_map: UidMap,
                  file_id: str = "") -> tuple[DataSet, AuditRecord]:
    """De-identify every element of ``ds`` (file meta and nested items included)."""
    audit = AuditRecord(file_id, profile.name)
    already = ds.text(TEMPORAL_MODIFIED) == "MODIFIED"
    applier = _Applier(profile, uid_map, audit, 0 if already else profile.date_shift_days)
    elements = applier.elements(ds.elements)
    meta = ds.meta
    if meta:
        meta = [m for m in (applier.element(e, (e.tag,)) if e.tag.element != 0 else e
                            for e in ds.meta) if m is not None]
    out = replace(ds, elements=elements, meta=meta)
    if ds.elements:
        out = replace_element(out, make_element(DEID_MARKER_TAGS[0], "CS", "YES"))
        out = replace_element(out, make_element(DEID_MARKER_TAGS[1], "LO",
                                                f"medideid {profile.name}"))
    if applier.shifted:
        out = replace_element(out, make_element(TEMPORAL_MODIFIED, "CS", "MODIFIED"))
    return out, audit
