"""DICOM Part-10 reading and writing with byte-exact round-trip.

Only the two little-endian uncompressed encodings are interpreted. Datasets
declared with a compressed transfer syntax are read as explicit VR little
endian and their encapsulated pixel data is carried as opaque bytes.

Elements keep enough of their original encoding (value bytes, length form)
that serializing an unmodified parse reproduces the input exactly.
"""

from __future__ import annotations

import bisect
import enum
import struct
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Sequence, Union

from .dictionary import keyword, lookup_vr

UNDEFINED_LENGTH = 0xFFFFFFFF
MAX_DEPTH = 32

IMPLICIT_VR_LE_UID = "1.2.840.10008.1.2"
EXPLICIT_VR_LE_UID = "1.2.840.10008.1.2.1"
_BIG_ENDIAN_UID = "1.2.840.10008.1.2.2"
_DEFLATED_UID = "1.2.840.10008.1.2.1.99"

LONG_VRS = frozenset("OB OD OF OL OV OW SQ SV UC UN UR UT UV".split())
SHORT_VRS = frozenset("AE AS AT CS DA DS DT FL FD IS LO LT PN SH SL SS ST TM UI UL US".split())
BINARY_VRS = frozenset("OB OD OF OL OV OW UN".split())
TEXT_VRS = frozenset("AE AS CS DA DS DT IS LO LT PN SH ST TM UC UI UR UT".split())


class DicomError(Exception):
    pass


class DicomParseError(DicomError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class DicomFormatError(DicomError):
    pass


class DicomSerializationError(DicomError):
    pass


class ElementNotFound(DicomError, KeyError):
    pass


class TransferSyntax(enum.Enum):
    IMPLICIT_LE = "implicit-LE"
    EXPLICIT_LE = "explicit-LE"

    @property
    def explicit(self) -> bool:
        return self is TransferSyntax.EXPLICIT_LE


class Tag(NamedTuple):
    group: int
    element: int

    @classmethod
    def parse(cls, text: str) -> "Tag":
        """Accept ``GGGG,EEEE``, ``(GGGG,EEEE)`` or ``GGGGEEEE``."""
        s = text.strip().strip("()").replace(" ", "")
        if "," in s:
            g, e = s.split(",")
        elif len(s) == 8:
            g, e = s[:4], s[4:]
        else:
            raise ValueError(f"not a tag: {text!r}")
        return cls(int(g, 16), int(e, 16))

    @property
    def is_private(self) -> bool:
        return self.group % 2 == 1

    @property
    def keyword(self) -> str:
        return keyword(self)

    def __str__(self) -> str:
        return f"({self.group:04X},{self.element:04X})"


ITEM = Tag(0xFFFE, 0xE000)
ITEM_DELIMITER = Tag(0xFFFE, 0xE00D)
SEQUENCE_DELIMITER = Tag(0xFFFE, 0xE0DD)
PIXEL_DATA = Tag(0x7FE0, 0x0010)
TRANSFER_SYNTAX_UID = Tag(0x0002, 0x0010)


@dataclass(frozen=True)
class Element:
    """One data element.

    ``value`` holds raw value bytes, or a tuple of item datasets when
    ``vr == "SQ"``. Elements with undefined length that are not sequences
    (encapsulated pixel data, undefined-length UN) keep their item stream,
    delimiter included, as opaque bytes.
    """

    tag: Tag
    vr: str
    value: Union[bytes, tuple]
    undefined_length: bool = False

    @property
    def is_sequence(self) -> bool:
        return isinstance(self.value, tuple)

    @property
    def items(self) -> tuple:
        return self.value if self.is_sequence else ()

    @property
    def length(self) -> int:
        if self.undefined_length:
            return UNDEFINED_LENGTH
        if self.is_sequence:
            return sum(len(_encode_item(it, it.transfer_syntax.explicit)) for it in self.value)
        return len(self.value)

    @property
    def text(self) -> str:
        if self.is_sequence:
            raise TypeError(f"{self.tag} is a sequence")
        return self.value.decode("latin-1").rstrip(" \x00")

    @property
    def values(self) -> list[str]:
        t = self.text
        return t.split("\\") if t else []

    def uint(self) -> int:
        """Decode a US/UL value (first value only)."""
        if self.vr == "US":
            return struct.unpack_from("<H", self.value)[0]
        if self.vr == "UL":
            return struct.unpack_from("<I", self.value)[0]
        if self.vr in ("IS", "DS"):
            return int(float(self.values[0]))
        raise TypeError(f"{self.tag} has VR {self.vr}, not an unsigned integer")


@dataclass
class DataSet:
    """Ordered element list.

    The same class represents a Part-10 file (``preamble`` set, ``meta``
    holding the group-0002 elements) and a sequence item (``preamble`` None).
    """

    elements: list[Element] = field(default_factory=list)
    transfer_syntax: TransferSyntax = TransferSyntax.EXPLICIT_LE
    preamble: bytes | None = None
    meta: list[Element] = field(default_factory=list)
    undefined_length: bool = False

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements)

    def _index(self, tag) -> int:
        tag = Tag(*tag)
        i = bisect.bisect_left([e.tag for e in self.elements], tag)
        if i < len(self.elements) and self.elements[i].tag == tag:
            return i
        return -1

    def __contains__(self, tag) -> bool:
        return self._index(tag) >= 0

    def __getitem__(self, tag) -> Element:
        i = self._index(tag)
        if i < 0:
            raise ElementNotFound(f"{Tag(*tag)} not present")
        return self.elements[i]

    def get(self, tag, default=None):
        i = self._index(tag)
        return self.elements[i] if i >= 0 else default

    def text(self, tag, default: str = "") -> str:
        e = self.get(tag)
        return e.text if e is not None and not e.is_sequence else default

    def walk(self, path: tuple = ()) -> Iterator[tuple[tuple, Element]]:
        """Depth-first ``(path, element)`` over this set and all nested items."""
        for e in self.elements:
            p = path + (e.tag,)
            yield p, e
            for i, item in enumerate(e.items):
                yield from item.walk(p + (i,))

    @property
    def is_part10(self) -> bool:
        return self.preamble is not None

    @property
    def transfer_syntax_uid(self) -> str:
        for e in self.meta:
            if e.tag == TRANSFER_SYNTAX_UID:
                return e.text
        return IMPLICIT_VR_LE_UID if self.transfer_syntax is TransferSyntax.IMPLICIT_LE else EXPLICIT_VR_LE_UID


# ---------------------------------------------------------------------------
# parsing


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.n = len(buf)

    def need(self, pos: int, count: int, what: str):
        if pos + count > self.n:
            raise DicomParseError(f"truncated stream reading {what}", pos)

    def tag(self, pos: int) -> Tag:
        self.need(pos, 4, "tag")
        g, e = struct.unpack_from("<HH", self.buf, pos)
        return Tag(g, e)

    def u32(self, pos: int) -> int:
        self.need(pos, 4, "length")
        return struct.unpack_from("<I", self.buf, pos)[0]

    def elements(self, pos: int, end: int, explicit: bool, depth: int,
                 until_item_delimiter: bool = False, stop_before: Tag | None = None,
                 only_group: int | None = None):
        out: list[Element] = []
        while pos < end:
            tag = self.tag(pos)
            if only_group is not None and tag.group != only_group:
                break
            if tag == ITEM_DELIMITER:
                if not until_item_delimiter:
                    raise DicomParseError("unexpected item delimiter", pos)
                return out, pos + 8
            if stop_before is not None and tag >= stop_before:
                return out, end
            elem, pos = self.element(pos, tag, explicit, depth)
            if out and elem.tag <= out[-1].tag:
                raise DicomParseError(f"element {elem.tag} out of order", pos)
            out.append(elem)
        if until_item_delimiter:
            raise DicomParseError("missing item delimiter", pos)
        return out, pos

    def element(self, pos: int, tag: Tag, explicit: bool, depth: int):
        start = pos
        if explicit:
            self.need(pos, 8, "element header")
            raw_vr = self.buf[pos + 4:pos + 6]
            if not (raw_vr.isalpha() and raw_vr.isupper()):
                raise DicomParseError(f"invalid VR {raw_vr!r} for {tag}", pos + 4)
            vr = raw_vr.decode("ascii")
            if vr in SHORT_VRS:
                length = struct.unpack_from("<H", self.buf, pos + 6)[0]
                pos += 8
            else:
                length = self.u32(pos + 8)
                pos += 12
        else:
            length = self.u32(pos + 4)
            pos += 8
            vr = lookup_vr(tag) or "UN"
            if length == UNDEFINED_LENGTH and vr != "SQ":
                vr = "SQ"

        if length == UNDEFINED_LENGTH:
            if vr == "SQ":
                items, pos = self.items(pos, self.n, explicit, depth + 1, undefined=True)
                return Element(tag, vr, items, True), pos
            if vr == "UN":
                # undefined-length UN carries an implicit-VR sequence
                _, end = self.items(pos, self.n, False, depth + 1, undefined=True)
            else:
                end = self.fragments(pos)
            return Element(tag, vr, self.buf[pos:end], True), end

        end = pos + length
        if end > self.n:
            raise DicomParseError(f"value of {tag} overruns file ({length} bytes)", start)
        if vr == "SQ":
            items, _ = self.items(pos, end, explicit, depth + 1, undefined=False)
            return Element(tag, vr, items, False), end
        if not explicit and vr == "UN" and length >= 8 and self.tag(pos) == ITEM:
            try:
                items, _ = self.items(pos, end, explicit, depth + 1, undefined=False)
                return Element(tag, "SQ", items, False), end
            except DicomError:
                pass
        return Element(tag, vr, self.buf[pos:end], False), end

    def items(self, pos: int, end: int, explicit: bool, depth: int, undefined: bool):
        if depth > MAX_DEPTH:
            raise DicomParseError(f"sequence nesting deeper than {MAX_DEPTH}", pos)
        items = []
        while True:
            if not undefined and pos >= end:
                break
            tag = self.tag(pos)
            if tag == SEQUENCE_DELIMITER:
                if not undefined:
                    raise DicomParseError("sequence delimiter in defined-length sequence", pos)
                return tuple(items), pos + 8
            if tag != ITEM:
                raise DicomParseError(f"expected item tag, found {tag}", pos)
            ilen = self.u32(pos + 4)
            pos += 8
            if ilen == UNDEFINED_LENGTH:
                elems, pos = self.elements(pos, self.n, explicit, depth, until_item_delimiter=True)
                items.append(DataSet(elems, _ts(explicit), undefined_length=True))
            else:
                iend = pos + ilen
                if iend > end:
                    raise DicomParseError("item overruns its sequence", pos - 8)
                elems, _ = self.elements(pos, iend, explicit, depth)
                items.append(DataSet(elems, _ts(explicit)))
                pos = iend
        return tuple(items), pos

    def fragments(self, pos: int) -> int:
        while True:
            tag = self.tag(pos)
            flen = self.u32(pos + 4)
            if tag == SEQUENCE_DELIMITER:
                return pos + 8
            if tag != ITEM:
                raise DicomParseError(f"expected fragment item, found {tag}", pos)
            pos += 8 + flen
            if pos > self.n:
                raise DicomParseError("fragment overruns file", pos)


def _ts(explicit: bool) -> TransferSyntax:
    return TransferSyntax.EXPLICIT_LE if explicit else TransferSyntax.IMPLICIT_LE


def _sniff_explicit(buf: bytes, pos: int) -> bool:
    vr = buf[pos + 4:pos + 6]
    return len(vr) == 2 and vr.decode("latin-1") in (SHORT_VRS | LONG_VRS)


def parse_dataset(data: bytes, *, raw: bool = False,
                  transfer_syntax: TransferSyntax | None = None,
                  stop_before=None) -> DataSet:
    """Parse a Part-10 file, or a headerless dataset stream when ``raw``.

    ``stop_before`` ends parsing at the first top-level tag >= that tag,
    which lets callers peek at headers without touching pixel data.
    """
    data = bytes(data)
    r = _Reader(data)
    stop = Tag(*stop_before) if stop_before is not None else None
    if raw:
        if transfer_syntax is None:
            transfer_syntax = _ts(len(data) >= 6 and _sniff_explicit(data, 0))
        elems, _ = r.elements(0, len(data), transfer_syntax.explicit, 0, stop_before=stop)
        return DataSet(elems, transfer_syntax)

    if len(data) < 132 or data[128:132] != b"DICM":
        raise DicomFormatError("missing DICM magic at offset 128")
    preamble = data[:128]
    meta, pos = r.elements(132, len(data), True, 0, only_group=0x0002)
    ts_elem = next((e for e in meta if e.tag == TRANSFER_SYNTAX_UID), None)
    if ts_elem is None:
        ts = _ts(pos + 6 <= len(data) and _sniff_explicit(data, pos))
    else:
        uid = ts_elem.text
        if uid == _BIG_ENDIAN_UID:
            raise DicomFormatError("big-endian transfer syntax is not supported")
        if uid == _DEFLATED_UID:
            raise DicomFormatError("deflated transfer syntax is not supported")
        ts = TransferSyntax.IMPLICIT_LE if uid == IMPLICIT_VR_LE_UID else TransferSyntax.EXPLICIT_LE
    elems, _ = r.elements(pos, len(data), ts.explicit, 0, stop_before=stop)
    return DataSet(elems, ts, preamble, meta)


# ---------------------------------------------------------------------------
# serialization


def _pad_byte(vr: str) -> bytes:
    return b"\x00" if vr == "UI" or vr in BINARY_VRS else b" "


def _header(tag: Tag, vr: str, length: int, explicit: bool) -> bytes:
    if not explicit:
        return struct.pack("<HHI", tag.group, tag.element, length)
    if vr in SHORT_VRS:
        if length > 0xFFFF:
            raise DicomSerializationError(f"{tag} value of {length} bytes too long for VR {vr}")
        return struct.pack("<HH2sH", tag.group, tag.element, vr.encode("ascii"), length)
    return struct.pack("<HH2sHI", tag.group, tag.element, vr.encode("ascii"), 0, length)


def _encode_item(item: DataSet, explicit: bool, pad_odd: bool = False) -> bytes:
    body = _encode_elements(item.elements, explicit, pad_odd)
    if item.undefined_length:
        return (struct.pack("<HHI", *ITEM, UNDEFINED_LENGTH) + body
                + struct.pack("<HHI", *ITEM_DELIMITER, 0))
    return struct.pack("<HHI", *ITEM, len(body)) + body


def _encode_element(e: Element, explicit: bool, pad_odd: bool) -> bytes:
    if e.is_sequence:
        body = b"".join(_encode_item(it, explicit, pad_odd) for it in e.value)
        if e.undefined_length:
            return (_header(e.tag, e.vr, UNDEFINED_LENGTH, explicit) + body
                    + struct.pack("<HHI", *SEQUENCE_DELIMITER, 0))
        return _header(e.tag, e.vr, len(body), explicit) + body
    if e.undefined_length:
        return _header(e.tag, e.vr, UNDEFINED_LENGTH, explicit) + e.value
    value = e.value
    if len(value) % 2:
        if not pad_odd:
            raise DicomSerializationError(f"{e.tag} has odd value length {len(value)}")
        value += _pad_byte(e.vr)
    return _header(e.tag, e.vr, len(value), explicit) + value


def _encode_elements(elements: Sequence[Element], explicit: bool, pad_odd: bool) -> bytes:
    return b"".join(_encode_element(e, explicit, pad_odd) for e in elements)


def serialize_dataset(ds: DataSet, *, pad_odd: bool = False) -> bytes:
    """Encode ``ds``; Part-10 sets get preamble, magic and file meta."""
    body = _encode_elements(ds.elements, ds.transfer_syntax.explicit, pad_odd)
    if ds.preamble is None:
        return body
    meta = [e for e in ds.meta if e.tag != Tag(0x0002, 0x0000)]
    meta_body = _encode_elements(meta, True, pad_odd)
    if any(e.tag == Tag(0x0002, 0x0000) for e in ds.meta):
        group_len = Element(Tag(0x0002, 0x0000), "UL", struct.pack("<I", len(meta_body)))
        meta_body = _encode_element(group_len, True, pad_odd) + meta_body
    return ds.preamble + b"DICM" + meta_body + body


# ---------------------------------------------------------------------------
# construction and editing


def encode_value(vr: str, value) -> bytes:
    """Encode a python value for ``vr``, padded to even length."""
    if isinstance(value, (bytes, bytearray)):
        raw = bytes(value)
    elif vr == "US":
        raw = b"".join(struct.pack("<H", v) for v in _as_list(value))
    elif vr == "UL":
        raw = b"".join(struct.pack("<I", v) for v in _as_list(value))
    elif vr == "SS":
        raw = b"".join(struct.pack("<h", v) for v in _as_list(value))
    elif vr == "SL":
        raw = b"".join(struct.pack("<i", v) for v in _as_list(value))
    elif vr == "FL":
        raw = b"".join(struct.pack("<f", v) for v in _as_list(value))
    elif vr == "FD":
        raw = b"".join(struct.pack("<d", v) for v in _as_list(value))
    elif isinstance(value, (list, tuple)):
        raw = "\\".join(_fmt(v) for v in value).encode("latin-1")
    else:
        raw = _fmt(value).encode("latin-1")
    if len(raw) % 2:
        raw += _pad_byte(vr)
    return raw


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _fmt(v) -> str:
    if isinstance(v, float):
        s = f"{v:.10g}"
        return s if len(s) <= 16 else f"{v:.8e}"
    return str(v)


def make_element(tag, vr: str, value=b"", *, undefined_length: bool = False) -> Element:
    tag = Tag(*tag) if not isinstance(tag, str) else Tag.parse(tag)
    if vr == "SQ":
        return Element(tag, vr, tuple(value), undefined_length)
    return Element(tag, vr, encode_value(vr, value), undefined_length)


def make_item(elements: Sequence[Element], *, undefined_length: bool = False,
              transfer_syntax: TransferSyntax = TransferSyntax.EXPLICIT_LE) -> DataSet:
    return DataSet(sorted(elements, key=lambda e: e.tag), transfer_syntax,
                   undefined_length=undefined_length)


def make_part10(elements: Sequence[Element], *,
                transfer_syntax: TransferSyntax = TransferSyntax.EXPLICIT_LE,
                sop_class_uid: str = "1.2.840.10008.5.1.4.1.1.7",
                sop_instance_uid: str | None = None,
                preamble: bytes = bytes(128)) -> DataSet:
    """Wrap elements in a Part-10 file with a minimal file meta group."""
    elements = sorted(elements, key=lambda e: e.tag)
    if sop_instance_uid is None:
        sop = next((e for e in elements if e.tag == (0x0008, 0x0018)), None)
        sop_instance_uid = sop.text if sop is not None else "1.2.3.4"
    ts_uid = IMPLICIT_VR_LE_UID if transfer_syntax is TransferSyntax.IMPLICIT_LE else EXPLICIT_VR_LE_UID
    meta = [
        make_element((0x0002, 0x0000), "UL", 0),
        make_element((0x0002, 0x0001), "OB", b"\x00\x01"),
        make_element((0x0002, 0x0002), "UI", sop_class_uid),
        make_element((0x0002, 0x0003), "UI", sop_instance_uid),
        make_element((0x0002, 0x0010), "UI", ts_uid),
        make_element((0x0002, 0x0012), "UI", "1.2.826.0.1.3680043.9.7433.1"),
    ]
    meta_len = len(_encode_elements(meta[1:], True, False))
    meta[0] = make_element((0x0002, 0x0000), "UL", meta_len)
    items_ts = [replace(e, value=tuple(_retag(it, transfer_syntax) for it in e.value))
                if e.is_sequence else e for e in elements]
    return DataSet(items_ts, transfer_syntax, preamble, meta)


def _retag(item: DataSet, ts: TransferSyntax) -> DataSet:
    elems = [replace(e, value=tuple(_retag(it, ts) for it in e.value)) if e.is_sequence else e
             for e in item.elements]
    return replace(item, elements=elems, transfer_syntax=ts)


REMOVE = object()


def _normalize_path(path) -> tuple:
    if isinstance(path, str):
        return (Tag.parse(path),)
    if isinstance(path, Tag):
        return (path,)
    path = tuple(path)
    if len(path) == 2 and all(type(p) is int for p in path):
        return (Tag(*path),)
    return tuple(p if type(p) is int else Tag(*p) for p in path)


def edit_element(ds: DataSet, path, value=REMOVE, *, vr: str | None = None,
                 strict: bool = False) -> DataSet:
    """Return a copy of ``ds`` with one element removed, replaced or inserted.

    ``path`` is a tag, or ``(seq_tag, item_index, ..., tag)`` to reach into
    sequences. ``value=REMOVE`` deletes the element; a value of ``str``,
    ``bytes`` or numbers replaces it (padded to even length). A missing tag
    is inserted in order unless ``strict``, which raises ``ElementNotFound``.
    """
    path = _normalize_path(path)
    if len(path) == 1:
        return _edit_here(ds, path[0], value, vr, strict)
    seq_tag, index, rest = path[0], path[1], path[2:]
    seq = ds.get(seq_tag)
    if seq is None or not seq.is_sequence:
        raise ElementNotFound(f"sequence {Tag(*seq_tag)} not present")
    if not 0 <= index < len(seq.items):
        raise ElementNotFound(f"item {index} of {Tag(*seq_tag)} not present")
    items = list(seq.items)
    items[index] = edit_element(items[index], rest, value, vr=vr, strict=strict)
    return replace_element(ds, replace(seq, value=tuple(items)))


def replace_element(ds: DataSet, elem: Element) -> DataSet:
    """Insert or replace ``elem`` at this nesting level, keeping tag order."""
    elems = list(ds.elements)
    tags = [e.tag for e in elems]
    i = bisect.bisect_left(tags, elem.tag)
    if i < len(elems) and elems[i].tag == elem.tag:
        elems[i] = elem
    else:
        elems.insert(i, elem)
    return replace(ds, elements=elems)


def _edit_here(ds: DataSet, tag, value, vr, strict) -> DataSet:
    tag = Tag(*tag)
    current = ds.get(tag)
    if value is REMOVE:
        if current is None:
            if strict:
                raise ElementNotFound(f"{tag} not present")
            return ds
        return replace(ds, elements=[e for e in ds.elements if e.tag != tag])
    if current is None:
        if strict:
            raise ElementNotFound(f"{tag} not present")
        vr = vr or lookup_vr(tag)
        if vr is None:
            raise DicomError(f"VR required to insert unknown tag {tag}")
        return replace_element(ds, make_element(tag, vr, value))
    vr = vr or current.vr
    if vr == "SQ":
        return replace_element(ds, Element(tag, vr, tuple(value), current.undefined_length))
    return replace_element(ds, Element(tag, vr, encode_value(vr, value)))


def describe(ds: DataSet) -> list[str]:
    """One line per element, values included; callers mask PHI."""
    lines = []
    for path, e in ds.walk():
        depth = sum(1 for p in path if isinstance(p, int))
        name = e.tag.keyword or ("private" if e.tag.is_private else "")
        if e.is_sequence:
            shown = f"<{len(e.items)} items>"
        elif e.vr in BINARY_VRS or e.undefined_length or e.vr not in TEXT_VRS:
            shown = f"<{e.length if not e.undefined_length else 'undefined'} bytes>"
        else:
            shown = e.text
        lines.append(f"{'  ' * depth}{e.tag} {e.vr} {name}: {shown}")
    return lines
