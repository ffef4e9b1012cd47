"""Seeded generators for fixtures: DICOM corpora, twix files, WSI studies, text images."""

from __future__ import annotations

import string
import struct
from dataclasses import dataclass

import numpy as np

from .dicom_core import (DataSet, Element, Tag, TransferSyntax, make_element, make_item,
                         make_part10, serialize_dataset)
from .dictionary import BASIC_ACTIONS, VR_DICT
from .font5x7 import render, text_size
from .text_redact import BoundingBox, Image2D, center_rect

UID_PREFIX = "1.2.826.0.1.3680043.10.543"
CT_IMAGE = "1.2.840.10008.5.1.4.1.1.2"
MR_IMAGE = "1.2.840.10008.5.1.4.1.1.4"
WSI_SOP_CLASS = "1.2.840.10008.5.1.4.1.1.77.1.6"

_UPPER = string.ascii_uppercase
_PHI_VRS = ("PN", "LO", "SH", "LT", "ST", "UT", "UC", "DA", "TM", "DT", "AS", "CS")
_MAX_LEN = {"SH": 16, "CS": 16, "LO": 64, "PN": 64}


def rng_of(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def word(rng, n: int) -> str:
    return "".join(rng.choice(list(_UPPER), size=n))


def uid(rng) -> str:
    return f"{UID_PREFIX}.{int(rng.integers(1, 10**9))}.{int(rng.integers(1, 10**12))}"


def phi_value(rng, vr: str) -> str:
    if vr == "PN":
        return f"{word(rng, 7)}^{word(rng, 6)}"
    if vr == "DA":
        return f"{int(rng.integers(1930, 2021))}{int(rng.integers(1, 13)):02d}{int(rng.integers(1, 29)):02d}"
    if vr == "TM":
        return f"{int(rng.integers(0, 24)):02d}{int(rng.integers(0, 60)):02d}{int(rng.integers(0, 60)):02d}"
    if vr == "DT":
        return phi_value(rng, "DA") + phi_value(rng, "TM")
    if vr == "AS":
        return f"{int(rng.integers(1, 99)):03d}Y"
    n = min(_MAX_LEN.get(vr, 24), 12)
    return word(rng, n)


def phi_tags() -> list[tuple[Tag, str]]:
    """Top-level text attributes the basic profile removes, blanks or dummies."""
    out = []
    for t, a in sorted(BASIC_ACTIONS.items()):
        vr = VR_DICT.get(t)
        if a in "XZD" and vr in _PHI_VRS and t[0] != 0x0002:
            out.append((Tag(*t), vr))
    return out


@dataclass
class PhiFixture:
    dataset: DataSet
    phi: list  # original identifying strings planted in the dataset


def phi_dataset(seed, n_tags: int = 34, transfer_syntax=TransferSyntax.EXPLICIT_LE) -> PhiFixture:
    """A Part-10 dataset with randomized PHI in top-level tags, private tags and sequences."""
    rng = rng_of(seed)
    pool = phi_tags()
    chosen = rng.choice(len(pool), size=min(n_tags, len(pool)), replace=False)
    phi: list[str] = []
    elems = []

    def plant(tag, vr):
        v = phi_value(rng, vr)
        phi.append(v)
        return make_element(tag, vr, v)

    for i in sorted(chosen):
        tag, vr = pool[i]
        elems.append(plant(tag, vr))
    study, series, sop = uid(rng), uid(rng), uid(rng)
    elems += [
        make_element((0x0008, 0x0016), "UI", CT_IMAGE),
        make_element((0x0008, 0x0018), "UI", sop),
        make_element((0x0008, 0x0060), "CS", "CT"),
        make_element((0x0020, 0x000D), "UI", study),
        make_element((0x0020, 0x000E), "UI", series),
        make_element((0x0009, 0x0010), "LO", "ACME 1.1"),
        plant((0x0009, 0x1001), "LO"),
    ]
    # PHI inside a removed sequence, a kept reference sequence and a dummied sequence
    other_ids = make_element((0x0010, 0x1002), "SQ", [
        make_item([plant((0x0010, 0x0020), "LO"), plant((0x0010, 0x0021), "LO")])])
    inner = make_item([make_element((0x0008, 0x1150), "UI", CT_IMAGE),
                       make_element((0x0008, 0x1155), "UI", uid(rng)),
                       plant((0x0010, 0x0010), "PN")])
    ref_images = make_element((0x0008, 0x1140), "SQ", [make_item([
        make_element((0x0008, 0x1150), "UI", CT_IMAGE),
        make_element((0x0008, 0x1155), "UI", uid(rng)),
        make_element((0x0008, 0x2112), "SQ", [inner]),
        plant((0x0008, 0x0090), "PN"),
    ], undefined_length=True)], undefined_length=True)
    verifying = make_element((0x0040, 0xA073), "SQ", [make_item([
        plant((0x0040, 0xA075), "PN"),
        plant((0x0008, 0x0080), "LO"),
        make_element((0x0040, 0xA030), "DT", "20200101120000"),
    ])])
    elems += [other_ids, ref_images, verifying]
    by_tag = {}
    for e in elems:
        by_tag.setdefault(e.tag, e)
    ds = make_part10(list(by_tag.values()), transfer_syntax=transfer_syntax,
                     sop_class_uid=CT_IMAGE, sop_instance_uid=sop)
    planted = [v for v in phi if v.encode() in serialize_dataset(ds)]
    return PhiFixture(ds, planted)


# ---------------------------------------------------------------------------
# round-trip corpus


_SCALAR_MAKERS = {
    "US": lambda r: [int(v) for v in r.integers(0, 65536, size=int(r.integers(1, 4)))],
    "UL": lambda r: [int(v) for v in r.integers(0, 2**32, size=int(r.integers(1, 3)))],
    "SS": lambda r: [int(v) for v in r.integers(-32768, 32768, size=int(r.integers(1, 3)))],
    "FD": lambda r: [float(v) for v in r.normal(size=int(r.integers(1, 3)))],
    "FL": lambda r: [float(np.float32(v)) for v in r.normal(size=int(r.integers(1, 3)))],
    "OB": lambda r: r.integers(0, 256, size=2 * int(r.integers(0, 20)), dtype=np.uint8).tobytes(),
    "OW": lambda r: r.integers(0, 256, size=2 * int(r.integers(0, 20)), dtype=np.uint8).tobytes(),
}

# (tag, vr) pairs whose dictionary VR agrees, so implicit encoding is unambiguous
_RT_TAGS = [
    ((0x0008, 0x0008), "CS"), ((0x0008, 0x0020), "DA"), ((0x0008, 0x0030), "TM"),
    ((0x0008, 0x0060), "CS"), ((0x0008, 0x0070), "LO"), ((0x0008, 0x0090), "PN"),
    ((0x0008, 0x103E), "LO"), ((0x0010, 0x0010), "PN"), ((0x0010, 0x0020), "LO"),
    ((0x0010, 0x0030), "DA"), ((0x0010, 0x1010), "AS"), ((0x0018, 0x0050), "DS"),
    ((0x0020, 0x0011), "IS"), ((0x0020, 0x0013), "IS"), ((0x0020, 0x0032), "DS"),
    ((0x0028, 0x0010), "US"), ((0x0028, 0x0011), "US"), ((0x0028, 0x0100), "US"),
    ((0x0028, 0x1050), "DS"), ((0x0018, 0x9089), "FD"), ((0x0020, 0x4000), "LT"),
]
_RT_SEQS = [(0x0008, 0x1140), (0x0008, 0x2112), (0x0040, 0xA730), (0x0010, 0x1002)]


def _random_text(rng, vr: str) -> str:
    if vr in ("DA", "TM", "DT", "AS"):
        return phi_value(rng, vr)
    if vr == "DS":
        return "\\".join(f"{v:.4f}" for v in rng.normal(size=int(rng.integers(1, 4))))
    if vr == "IS":
        return str(int(rng.integers(-1000, 1000)))
    n = int(rng.integers(0, 13))
    return "".join(rng.choice(list(_UPPER + " "), size=n)).strip()


def _random_elements(rng, depth: int, max_depth: int) -> list[Element]:
    picks = rng.choice(len(_RT_TAGS), size=int(rng.integers(2, 8)), replace=False)
    elems = []
    for i in picks:
        tag, vr = _RT_TAGS[i]
        if vr in _SCALAR_MAKERS:
            elems.append(make_element(tag, vr, _SCALAR_MAKERS[vr](rng)))
        else:
            elems.append(make_element(tag, vr, _random_text(rng, vr)))
    if depth < max_depth and rng.random() < 0.8:
        for seq_tag in rng.choice(len(_RT_SEQS), size=int(rng.integers(1, 3)), replace=False):
            items = [make_item(_random_elements(rng, depth + 1, max_depth),
                               undefined_length=bool(rng.random() < 0.5))
                     for _ in range(int(rng.integers(0, 3)))]
            elems.append(make_element(_RT_SEQS[seq_tag], "SQ", items,
                                      undefined_length=bool(rng.random() < 0.5)))
    if depth == 0:
        elems.append(make_element((0x0009, 0x0010), "LO", "PRIVATE CREATOR"))
        elems.append(make_element((0x0009, 0x1002), "OB" if rng.random() < 0.5 else "UN",
                                  _SCALAR_MAKERS["OB"](rng)))
        elems.append(make_element((0x7FE0, 0x0010), "OW", _SCALAR_MAKERS["OW"](rng)))
    return elems


def roundtrip_dataset(seed, max_depth: int = 3) -> DataSet:
    rng = rng_of(seed)
    ts = TransferSyntax.IMPLICIT_LE if rng.random() < 0.5 else TransferSyntax.EXPLICIT_LE
    elems = _random_elements(rng, 0, max_depth)
    # guarantee one chain reaching max_depth
    chain = [make_element((0x0008, 0x0060), "CS", "OT")]
    for _ in range(max_depth):
        chain = [make_element((0x0040, 0xA730), "SQ", [make_item(chain)])]
    elems = [e for e in elems if e.tag != (0x0040, 0xA730)] + chain
    by_tag = {}
    for e in elems:
        by_tag.setdefault(e.tag, e)
    return make_part10(list(by_tag.values()), transfer_syntax=ts, sop_instance_uid=uid(rng))


def sequence_depth(ds: DataSet) -> int:
    return max((1 + max((sequence_depth(it) for it in e.items), default=0)
                for e in ds.elements if e.is_sequence), default=0)


# ---------------------------------------------------------------------------
# UID cross-reference corpus


def uid_corpus(seed, studies: int = 3, series_per_study: int = 2, instances: int = 3) -> list[DataSet]:
    """Studies whose instances reference each other (and earlier studies) by UID."""
    rng = rng_of(seed)
    out = []
    all_sops: list[str] = []
    for s in range(studies):
        study, frame = uid(rng), uid(rng)
        for _ in range(series_per_study):
            series = uid(rng)
            prev = None
            for k in range(instances):
                sop = uid(rng)
                elems = [
                    make_element((0x0008, 0x0016), "UI", MR_IMAGE),
                    make_element((0x0008, 0x0018), "UI", sop),
                    make_element((0x0010, 0x0010), "PN", f"PATIENT^{s}"),
                    make_element((0x0020, 0x000D), "UI", study),
                    make_element((0x0020, 0x000E), "UI", series),
                    make_element((0x0020, 0x0052), "UI", frame),
                    make_element((0x0020, 0x0013), "IS", k + 1),
                ]
                if prev is not None:
                    elems.append(make_element((0x0008, 0x1140), "SQ", [make_item([
                        make_element((0x0008, 0x1150), "UI", MR_IMAGE),
                        make_element((0x0008, 0x1155), "UI", prev)])]))
                if all_sops and s > 0 and k == 0:
                    src = all_sops[int(rng.integers(0, len(all_sops)))]
                    elems.append(make_element((0x0008, 0x2112), "SQ", [make_item([
                        make_element((0x0008, 0x1150), "UI", MR_IMAGE),
                        make_element((0x0008, 0x1155), "UI", src)])]))
                out.append(make_part10(elems, sop_class_uid=MR_IMAGE, sop_instance_uid=sop))
                prev = sop
        all_sops = [ds.text((0x0008, 0x0018)) for ds in out]
    return out


# ---------------------------------------------------------------------------
# image datasets


def image_dataset(pixels: np.ndarray, *, seed=0, extra=(), sop_class=CT_IMAGE,
                  image_type="ORIGINAL\\PRIMARY\\AXIAL", study=None, series=None,
                  transfer_syntax=TransferSyntax.EXPLICIT_LE) -> DataSet:
    """Single-frame native-pixel dataset around ``pixels`` (H, W) or (H, W, 3)."""
    rng = rng_of(seed)
    px = np.asarray(pixels)
    rgb = px.ndim == 3
    bits = 8 if px.dtype.itemsize == 1 else 16
    sop = uid(rng)
    elems = [
        make_element((0x0008, 0x0008), "CS", image_type),
        make_element((0x0008, 0x0016), "UI", sop_class),
        make_element((0x0008, 0x0018), "UI", sop),
        make_element((0x0008, 0x0060), "CS", "OT"),
        make_element((0x0010, 0x0010), "PN", f"{word(rng, 6)}^{word(rng, 5)}"),
        make_element((0x0010, 0x0020), "LO", word(rng, 8)),
        make_element((0x0020, 0x000D), "UI", study or uid(rng)),
        make_element((0x0020, 0x000E), "UI", series or uid(rng)),
        make_element((0x0028, 0x0002), "US", 3 if rgb else 1),
        make_element((0x0028, 0x0004), "CS", "RGB" if rgb else "MONOCHROME2"),
        make_element((0x0028, 0x0010), "US", px.shape[0]),
        make_element((0x0028, 0x0011), "US", px.shape[1]),
        make_element((0x0028, 0x0100), "US", bits),
        make_element((0x0028, 0x0101), "US", bits),
        make_element((0x0028, 0x0102), "US", bits - 1),
        make_element((0x0028, 0x0103), "US", 0),
        make_element((0x7FE0, 0x0010), "OB" if bits == 8 else "OW",
                     np.ascontiguousarray(px, dtype="u1" if bits == 8 else "<u2").tobytes()),
    ]
    if rgb:
        elems.append(make_element((0x0028, 0x0006), "US", 0))
    tags = {e.tag for e in extra}
    elems = [e for e in elems if e.tag not in tags] + list(extra)
    return make_part10(elems, transfer_syntax=transfer_syntax, sop_class_uid=sop_class,
                       sop_instance_uid=sop)


def slice_series(volume: np.ndarray, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0),
                 seed=0) -> list[DataSet]:
    """Axial slices of ``volume`` (rows, cols, n) as int16 CT instances, in LPS."""
    rng = rng_of(seed)
    study, series, frame = uid(rng), uid(rng), uid(rng)
    out = []
    for k in range(volume.shape[2]):
        pos = (origin[0], origin[1], origin[2] + k * spacing[2])
        extra = [
            make_element((0x0020, 0x0013), "IS", k + 1),
            make_element((0x0020, 0x0032), "DS", [f"{p:.6g}" for p in pos]),
            make_element((0x0020, 0x0037), "DS", ["1", "0", "0", "0", "1", "0"]),
            make_element((0x0020, 0x0052), "UI", frame),
            make_element((0x0028, 0x0030), "DS", [f"{spacing[0]:.6g}", f"{spacing[1]:.6g}"]),
            make_element((0x0018, 0x0050), "DS", f"{spacing[2]:.6g}"),
            make_element((0x0028, 0x1052), "DS", "0"),
            make_element((0x0028, 0x1053), "DS", "1"),
        ]
        out.append(image_dataset(volume[:, :, k].astype(np.uint16), seed=rng, extra=extra,
                                 study=study, series=series))
    return out


# ---------------------------------------------------------------------------
# WSI


def wsi_study(seed, *, volumes: int = 3, label: bool = True, overview: bool = True,
              label_shape=(16, 24), overview_shape=(24, 40)) -> list[tuple[str, DataSet]]:
    rng = rng_of(seed)
    study, series = uid(rng), uid(rng)
    patient = [make_element((0x0010, 0x0010), "PN", f"{word(rng, 7)}^{word(rng, 5)}"),
               make_element((0x0010, 0x0020), "LO", word(rng, 9)),
               make_element((0x0020, 0x0052), "UI", uid(rng))]
    out = []

    def add(name, shape, image_type):
        px = rng.integers(1, 256, size=(*shape, 3), dtype=np.uint8)
        out.append((name, image_dataset(px, seed=rng, extra=patient, sop_class=WSI_SOP_CLASS,
                                        image_type=image_type, study=study, series=series)))

    for i in range(volumes):
        add(f"volume_{i}.dcm", (32 >> i or 1, 32 >> i or 1), "ORIGINAL\\PRIMARY\\VOLUME\\NONE")
    if label:
        add("label.dcm", label_shape, "ORIGINAL\\PRIMARY\\LABEL\\NONE")
    if overview:
        add("overview.dcm", overview_shape, "ORIGINAL\\PRIMARY\\OVERVIEW\\NONE")
    return out


# ---------------------------------------------------------------------------
# twix


_MEAS_YAPS = """### ASCCONV BEGIN object=MrProtDataImpl@MrProtocolData version=51130001 ###
ulVersion = 0x14b44b6
tSequenceFileName = "%CustomerSeq%\\gre"
tProtocolName = "gre_field_mapping"
sKSpace.lBaseResolution = 64
sKSpace.lPhaseEncodingLines = 64
sTXSPEC.asNucleusInfo[0].tNucleus = "1H"
tPatientName = "{name}"
PatientID = {pid}
PatientBirthDay = {birth}
tPerfPhysiciansName = "{physician}"
### ASCCONV END ###
"""

_XPROTOCOL = """<XProtocol>
{{
  <Name> "PhoenixMetaProtocol"
  <ParamString."PatientName">  {{ "{name}"  }}
  <ParamString."PatientID">  {{ "{pid}"  }}
  <ParamString."PatientBirthDay">  {{ "{birth}"  }}
  <ParamString."InstitutionName">  {{ "{institution}"  }}
  <ParamLong."NoOfFourierColumns">  {{ 128  }}
  <ParamDouble."flMagneticFieldStrength">  {{ <Precision> 6  2.893620  }}
}}
"""


@dataclass
class TwixFixture:
    data: bytes
    phi: dict  # key -> planted value
    value_spans: list  # (offset, length) of every planted value, oracle-computed


def _twix_section(rng, phi: dict) -> bytes:
    text = (_XPROTOCOL.format(**phi) + _MEAS_YAPS.format(**phi)).encode("ascii")
    kspace = rng.integers(0, 256, size=int(rng.integers(512, 2048)), dtype=np.uint8)
    kspace[::3] = 0  # nulls break accidental printable runs
    return struct.pack("<I", len(text) + 4) + text + kspace.tobytes()


def twix_file(seed, *, sections: int = 1, raid_header: bool = False) -> TwixFixture:
    rng = rng_of(seed)
    phi = {"name": f"{word(rng, 8)}^{word(rng, 5)}", "pid": str(int(rng.integers(10**7, 10**8))),
           "birth": f"{int(rng.integers(1930, 2010))}0{int(rng.integers(1, 10))}1{int(rng.integers(0, 9))}",
           "physician": word(rng, 9), "institution": word(rng, 10)}
    body = b"".join(_twix_section(rng, phi) for _ in range(sections))
    head = b""
    if raid_header:
        entries = bytearray(8 + 64 * 152)
        struct.pack_into("<II", entries, 0, 0, sections)
        off = len(entries)
        for i in range(sections):
            base = 8 + i * 152
            struct.pack_into("<IIQQ", entries, base, 100 + i, 200 + i, off, len(body) // sections)
            name = phi["name"].encode()[:63]
            entries[base + 24:base + 24 + len(name)] = name
            entries[base + 88:base + 88 + 10] = b"gre_field_"
        head = bytes(entries)
    data = head + body
    spans = []
    for key in ("name", "pid", "birth", "physician", "institution"):
        v = phi[key].encode()
        start = 0
        while (i := data.find(v, start)) >= 0:
            spans.append((i, len(v)))
            start = i + 1
    return TwixFixture(data, phi, sorted(spans))


# ---------------------------------------------------------------------------
# text images


TEXT_CATEGORIES = ("border", "center", "mixed", "none")


@dataclass
class TextImage:
    image: Image2D
    ground_truth: list  # BoundingBox per planted string
    category: str


def _random_label(rng) -> str:
    forms = [lambda: word(rng, int(rng.integers(3, 8))),
             lambda: f"{word(rng, 3)}:{int(rng.integers(10, 99))}",
             lambda: f"{int(rng.integers(10, 32))}/{int(rng.integers(10, 13))}/{int(rng.integers(1950, 2020))}",
             lambda: f"{word(rng, 4)} {word(rng, 5)}"]
    return forms[int(rng.integers(0, len(forms)))]()


def _place(rng, text: str, region, taken, tries: int = 200):
    w, h = text_size(text)
    x0, y0, x1, y1 = region
    for _ in range(tries):
        if x1 - w < x0 or y1 - h < y0:
            return None
        x = int(rng.integers(x0, x1 - w + 1))
        y = int(rng.integers(y0, y1 - h + 1))
        box = BoundingBox(x, y, w, h, text)
        margin = BoundingBox(x - 4, y - 4, w + 8, h + 8)
        if not any(margin.overlaps(t) for t in taken):
            return box
    return None


def text_image(seed, category: str, shape=(128, 160), rect_fraction: float = 0.5) -> TextImage:
    """Noisy ultrasound-like background with planted 5x7 text (ink = 255)."""
    if category not in TEXT_CATEGORIES:
        raise ValueError(category)
    rng = rng_of(seed)
    H, W = shape
    px = rng.integers(0, 120, size=shape, dtype=np.uint8)
    yy, xx = np.mgrid[0:H, 0:W]
    cone = ((yy - H * 0.1) / (H * 0.8)) ** 2 + ((xx - W / 2) / (W * 0.4)) ** 2 < 1
    px[cone] = np.minimum(px[cone].astype(int) + 80, 250).astype(np.uint8)
    rx, ry, rw, rh = center_rect(W, H, rect_fraction)
    boxes: list[BoundingBox] = []
    n_border = {"border": 3, "mixed": 2}.get(category, 0)
    n_center = {"center": 1, "mixed": 1}.get(category, 0)
    top = (1, 1, W - 1, ry - 3)
    bottom = (1, ry + rh + 3, W - 1, H - 1)
    for i in range(n_border):
        for _ in range(20):
            b = _place(rng, _random_label(rng), top if i % 2 == 0 else bottom, boxes)
            if b is not None:
                boxes.append(b)
                break
    inner = (rx + 2, ry + 2, rx + rw - 2, ry + rh - 2)
    for _ in range(n_center):
        for _ in range(20):
            b = _place(rng, _random_label(rng), inner, boxes)
            if b is not None:
                boxes.append(b)
                break
    for b in boxes:
        glyphs = render(b.text)
        region = px[b.y:b.y1, b.x:b.x1]
        region[glyphs] = 255
        # the ring and gaps must not carry ink by accident
        region[~glyphs] = np.minimum(region[~glyphs], 250)
    return TextImage(Image2D(px), boxes, category)


def text_corpus(seed, n: int = 100) -> list[TextImage]:
    rng = rng_of(seed)
    return [text_image(rng, TEXT_CATEGORIES[i % len(TEXT_CATEGORIES)]) for i in range(n)]


# ---------------------------------------------------------------------------
# mixed input tree for pipeline runs


MIXED_TREE_STAGES = {
    "DICOM": ["metadata", "text-redact"],
    "DICOM_WSI": ["metadata", "wsi"],
    "NIFTI": ["metadata", "skull-strip", "deface"],
    "TWIX": ["metadata"],
    "IMAGE2D": ["metadata", "text-redact"],
}


def _png_with_text_chunk(image: Image2D, phi: str) -> bytes:
    import io

    from PIL import Image, PngImagePlugin

    info = PngImagePlugin.PngInfo()
    info.add_text("PatientName", phi)
    buf = io.BytesIO()
    Image.fromarray(image.pixels).save(buf, format="PNG", pnginfo=info)
    return buf.getvalue()


def write_mixed_tree(root, seed=0) -> dict:
    """Write 20 files of every kind under ``root``; returns ``{relative path: kind}``."""
    from pathlib import Path

    from . import nifti_io
    from .phantoms import HeadPhantomSpec, head_phantom

    rng = rng_of(seed)
    root = Path(root)
    kinds = {}

    def put(rel, data, kind):
        p = root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data)
        kinds[rel] = kind

    for i in range(4):
        t = text_image(rng, TEXT_CATEGORIES[i % 3])
        ts = TransferSyntax.IMPLICIT_LE if i == 3 else TransferSyntax.EXPLICIT_LE
        put(f"dicom/us_{i}.dcm", serialize_dataset(image_dataset(t.image.pixels, seed=rng,
                                                                  transfer_syntax=ts)), "DICOM")
    for i in range(3):
        ph = head_phantom(HeadPhantomSpec(noise_sigma=2.0 * i, seed=int(rng.integers(1 << 30))))
        h = nifti_io.header_for(ph.volume, None, 16)
        h["descrip"] = f"{word(rng, 8)} {word(rng, 6)}".encode()
        gz = i == 0
        put(f"nifti/head_{i}.nii" + (".gz" if gz else ""), nifti_io.write_nifti(h, ph.volume, gz=gz), "NIFTI")
    for i in range(3):
        fx = twix_file(rng, sections=2 if i == 2 else 1, raid_header=i == 2)
        put(f"raw/meas_{i}.dat", fx.data, "TWIX")
    for i in range(4):
        t = text_image(rng, TEXT_CATEGORIES[i % 4])
        put(f"png/frame_{i}.png", _png_with_text_chunk(t.image, word(rng, 9)), "IMAGE2D")
    for name, ds in wsi_study(rng):
        put(f"wsi/{name}", serialize_dataset(ds), "DICOM_WSI")
    put("misc/notes.bin", rng.integers(0, 256, size=700, dtype=np.uint8).tobytes(), "UNKNOWN")
    return kinds
