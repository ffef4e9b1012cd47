"""Batch routing: detect each input's kind, run the enabled stages, write outputs and a manifest."""

from __future__ import annotations

import enum
import fnmatch
import json
import logging
import os
import secrets
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import nifti_io, twix_scrub
from .deid_rules import (ActionCode, ConfigError, DeidProfile, UidMap, action_for_tag,
                         apply_profile, load_profile_file)
from .dicom_core import DataSet, DicomError, Tag, parse_dataset, serialize_dataset
from .imageio import decode_png, encode_png
from .nifti_io import Volume
from .pixels import pixel_array, with_pixel_array
from .text_redact import Image2D, make_detector, redact_pipeline
from .volume_ops import DefaceParams, StripParams, deface, reorient_to_ras, skull_strip
from .wsi_deid import Disposition, WsiStudy, deid_wsi_study

log = logging.getLogger(__name__)

HEAD_BYTES = 65536
WSI_SOP_CLASS = "1.2.840.10008.5.1.4.1.1.77.1.6"
PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
STAGE_ORDER = ("metadata", "skull-strip", "deface", "text-redact", "wsi")


class InputKind(str, enum.Enum):
    DICOM = "DICOM"
    DICOM_WSI = "DICOM_WSI"
    NIFTI = "NIFTI"
    TWIX = "TWIX"
    IMAGE2D = "IMAGE2D"
    UNKNOWN = "UNKNOWN"


ALLOWED_STAGES = {
    InputKind.DICOM: ("metadata", "skull-strip", "deface", "text-redact"),
    InputKind.DICOM_WSI: ("metadata", "wsi"),
    InputKind.NIFTI: ("metadata", "skull-strip", "deface"),
    InputKind.TWIX: ("metadata",),
    InputKind.IMAGE2D: ("metadata", "text-redact"),
    InputKind.UNKNOWN: (),
}
DEFAULT_STAGES = {
    InputKind.DICOM: ("metadata",),
    InputKind.DICOM_WSI: ("metadata", "wsi"),
    InputKind.NIFTI: ("metadata",),
    InputKind.TWIX: ("metadata",),
    InputKind.IMAGE2D: ("metadata", "text-redact"),
    InputKind.UNKNOWN: (),
}
VOLUMETRIC = {"skull-strip", "deface"}


# ---------------------------------------------------------------------------
# detection


def _gunzip_head(head: bytes, n: int = 352) -> bytes:
    try:
        d = zlib.decompressobj(16 + zlib.MAX_WBITS)
        return d.decompress(head, n)
    except zlib.error:
        return b""


def _dicom_subkind(head: bytes) -> InputKind:
    try:
        ds = parse_dataset(head, stop_before=(0x0008, 0x0009))
    except DicomError:
        # a truncated head can still carry the meta group
        return InputKind.DICOM
    sop = next((e.text for e in ds.meta if e.tag == (0x0002, 0x0002)), "") or ds.text((0x0008, 0x0016))
    if sop == WSI_SOP_CLASS:
        return InputKind.DICOM_WSI
    image_type = ds.get((0x0008, 0x0008))
    if image_type is not None and {"LABEL", "OVERVIEW"} & {v.strip().upper() for v in image_type.values}:
        return InputKind.DICOM_WSI
    return InputKind.DICOM


def detect_input_type(path, head: bytes) -> InputKind:
    """Classify by magic bytes; the extension is consulted only for twix."""
    path = Path(path)
    if len(head) >= 132 and head[128:132] == b"DICM":
        return _dicom_subkind(head)
    nifti_head = _gunzip_head(head) if head[:2] == b"\x1f\x8b" else head
    if len(nifti_head) >= 348 and nifti_head[344:348] == b"n+1\x00":
        return InputKind.NIFTI
    if head.startswith(PNG_MAGIC):
        return InputKind.IMAGE2D
    if path.suffix.lower() == ".dat" and (twix_scrub.ascii_regions(head) or twix_scrub._raid_entries(head)):
        return InputKind.TWIX
    return InputKind.UNKNOWN


# ---------------------------------------------------------------------------
# configuration


@dataclass
class JobConfig:
    inputs: list
    output: str
    profile: str = "basic"
    stages: object = None  # None, list applied to every kind, or {kind: [stages]}
    strip: StripParams = field(default_factory=StripParams)
    deface: DefaceParams = field(default_factory=DefaceParams)
    detector: dict = field(default_factory=lambda: {"kind": "builtin-synthetic"})
    rect_fraction: float = 0.5
    fill_mode: str = "min-value"
    overview_left_fraction: float = 0.5
    wsi_converted: list = field(default_factory=list)  # glob patterns of converted study files
    twix_fields: list = field(default_factory=list)
    workers: int = 1
    uid_map_path: str | None = None
    uid_key: str | None = None
    uid_root: str = "2.25"

    @classmethod
    def from_mapping(cls, data: dict, base_dir: str | Path = ".") -> "JobConfig":
        data = dict(data or {})
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        base = Path(base_dir)
        try:
            if isinstance(data.get("inputs"), str):
                data["inputs"] = [data["inputs"]]
            data["inputs"] = [str((base / p)) for p in data.get("inputs") or []]
            if "output" in data:
                data["output"] = str(base / data["output"])
            if data.get("uid_map_path"):
                data["uid_map_path"] = str(base / data["uid_map_path"])
            if "strip" in data:
                data["strip"] = StripParams(**(data["strip"] or {}))
            if "deface" in data:
                data["deface"] = DefaceParams(**(data["deface"] or {}))
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    def stages_for(self, kind: InputKind) -> tuple:
        allowed = ALLOWED_STAGES[kind]
        if self.stages is None:
            return DEFAULT_STAGES[kind]
        if isinstance(self.stages, dict):
            chosen = self.stages.get(kind.value, self.stages.get(kind.value.lower(), DEFAULT_STAGES[kind]))
            return tuple(s for s in STAGE_ORDER if s in chosen)
        return tuple(s for s in STAGE_ORDER if s in self.stages and s in allowed)

    def validate(self) -> None:
        if not self.inputs:
            raise ConfigError("no input roots given")
        if not self.output:
            raise ConfigError("no output root given")
        out = Path(self.output).resolve()
        for root in self.inputs:
            r = Path(root).resolve()
            if out == r or r in out.parents or out in r.parents:
                raise ConfigError(f"output root {out} overlaps input root {r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if isinstance(self.stages, dict):
            for name, chosen in self.stages.items():
                try:
                    kind = InputKind(str(name).upper())
                except ValueError:
                    raise ConfigError(f"unknown input kind {name!r} in stages") from None
                bad = set(chosen) - set(ALLOWED_STAGES[kind])
                if bad:
                    raise ConfigError(f"stages {sorted(bad)} not allowed for {kind.value}")
        elif self.stages is not None:
            bad = set(self.stages) - set(STAGE_ORDER)
            if bad:
                raise ConfigError(f"unknown stages {sorted(bad)}")
        if not 0 < self.rect_fraction < 1:
            raise ConfigError("rect_fraction must lie in (0, 1)")
        if self.fill_mode not in ("min-value", "mean-border"):
            raise ConfigError(f"unknown fill_mode {self.fill_mode!r}")
        if not 0 < self.overview_left_fraction <= 1:
            raise ConfigError("overview_left_fraction must lie in (0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("uid_key", None)
        return d


def load_config(path, overrides: dict | None = None) -> JobConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return JobConfig.from_mapping(data, path.parent)


# ---------------------------------------------------------------------------
# manifest


class _Laps:
    """Contiguous stage timer: the laps always add up to the wall time."""

    def __init__(self):
        self.start = self.last = time.perf_counter()
        self.durations: dict[str, float] = {}

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.durations[name] = self.durations.get(name, 0.0) + now - self.last
        self.last = now

    @property
    def wall(self) -> float:
        return self.last - self.start


@dataclass
class FileRecord:
    input: str
    kind: str
    stages: list
    disposition: str  # WRITTEN | DROPPED | ERROR | SKIPPED
    output: str | None = None
    durations: dict = field(default_factory=dict)
    wall_time: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


VOLATILE_FIELDS = ("durations", "wall_time", "timestamp")


@dataclass
class Manifest:
    records: list
    wall_time: float = 0.0

    @property
    def counts(self) -> dict:
        out: dict[str, int] = {}
        for r in self.records:
            out[r.disposition] = out.get(r.disposition, 0) + 1
        return dict(sorted(out.items()))

    @property
    def exit_code(self) -> int:
        return 1 if any(r.disposition == "ERROR" for r in self.records) else 0

    def lines(self) -> list[str]:
        out = [json.dumps(r.to_dict(), sort_keys=True) for r in sorted(self.records, key=lambda r: r.input)]
        out.append(json.dumps({"summary": {"files": len(self.records), "counts": self.counts,
                                           "wall_time": self.wall_time}}, sort_keys=True))
        return out

    def write(self, path) -> None:
        Path(path).write_text("\n".join(self.lines()) + "\n")


# ---------------------------------------------------------------------------
# routes


@dataclass
class _Job:
    config: JobConfig
    profile: DeidProfile
    uid_map: UidMap
    out_root: Path
    twix_specs: tuple
    detector: object
    audits: list = field(default_factory=list)


@dataclass
class _Input:
    path: Path
    rel: str  # manifest/output-relative name
    kind: InputKind = InputKind.UNKNOWN
    error: str | None = None


def _out_path(job: _Job, rel: str) -> Path:
    p = job.out_root / rel
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _err(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def _dicom_bytes(job: _Job, ds: DataSet, rel: str, stages) -> tuple[bytes, object]:
    audit = None
    if "text-redact" in stages:
        arr = pixel_array(ds)
        if arr.shape[0] != 1:
            raise DicomError("text redaction needs a single-frame image")
        img = arr[0, :, :, 0] if arr.shape[3] == 1 else arr[0]
        clean, _ = redact_pipeline(Image2D(img), job.detector, job.config.rect_fraction,
                                   job.config.fill_mode)
        ds = with_pixel_array(ds, clean.pixels.reshape(arr.shape))
    if "metadata" in stages:
        ds, audit = apply_profile(ds, job.profile, job.uid_map, rel)
    return serialize_dataset(ds, pad_odd=True), audit


def _run_file(job: _Job, item: _Input) -> FileRecord:
    stages = list(job.config.stages_for(item.kind))
    rec = FileRecord(item.rel, item.kind.value, stages, "WRITTEN")
    laps = _Laps()
    try:
        data = item.path.read_bytes()
        laps.lap("read")
        if item.kind is InputKind.DICOM:
            ds = parse_dataset(data)
            laps.lap("parse")
            out, audit = _dicom_bytes(job, ds, item.rel, stages)
            if audit is not None:
                job.audits.append(audit)
            laps.lap("metadata" if "metadata" in stages else "encode")
        elif item.kind is InputKind.NIFTI:
            out = _nifti_bytes(job, data, stages, laps)
        elif item.kind is InputKind.TWIX:
            specs = job.twix_specs
            out = data
            if "metadata" in stages:
                out, _matches, _report = twix_scrub.scrub_twix(data, specs)
            laps.lap("metadata")
        elif item.kind is InputKind.IMAGE2D:
            img = decode_png(data)
            if "text-redact" in stages:
                img, _boxes = redact_pipeline(img, job.detector, job.config.rect_fraction,
                                              job.config.fill_mode)
                laps.lap("text-redact")
            out = encode_png(img)
            laps.lap("metadata")
        else:
            rec.disposition = "SKIPPED"
            rec.stages = []
            out = None
        if out is not None:
            _out_path(job, item.rel).write_bytes(out)
            rec.output = item.rel
            laps.lap("write")
    except Exception as exc:
        laps.lap("error")
        rec.disposition, rec.error, rec.output = "ERROR", _err(exc), None
    rec.durations, rec.wall_time = laps.durations, laps.wall
    return rec


def _volume_stages(job: _Job, vol: Volume, stages, laps: _Laps) -> Volume:
    vol = reorient_to_ras(vol)
    laps.lap("reorient")
    if "skull-strip" in stages or "deface" in stages:
        mask = skull_strip(vol, job.config.strip)
        laps.lap("skull-strip")
        if "deface" in stages:
            vol = deface(vol, mask, job.config.deface)
            laps.lap("deface")
        if "skull-strip" in stages:
            vol = Volume(np.where(mask, vol.data, 0.0), vol.affine, vol.source_dtype, vol.meta)
            laps.lap("skull-strip")
    return vol


def _nifti_bytes(job: _Job, data: bytes, stages, laps: _Laps) -> bytes:
    gz = data[:2] == b"\x1f\x8b"
    h, vol = nifti_io.read_nifti(data, gz)
    laps.lap("parse")
    if "metadata" in stages:
        h = nifti_io.scrub_nifti_header(h)
        laps.lap("metadata")
    if VOLUMETRIC & set(stages):
        vol = _volume_stages(job, vol, stages, laps)
        h = nifti_io.header_for(vol, h, int(h["datatype"]))
    return nifti_io.write_nifti(h, vol, gz=gz)


def _run_series(job: _Job, items: list[_Input]) -> list[FileRecord]:
    """Assemble a DICOM series into a volume, strip/deface it and write one NIfTI."""
    stages = [s for s in job.config.stages_for(InputKind.DICOM) if s != "text-redact"]
    laps = _Laps()
    out_rel, error = None, None
    try:
        datasets = [parse_dataset(i.path.read_bytes()) for i in items]
        laps.lap("read")
        vol = dicom_series_to_volume(datasets)
        laps.lap("assemble")
        vol = _volume_stages(job, vol, stages, laps)
        series = datasets[0].text((0x0020, 0x000E))
        name = job.uid_map.remap(series) if series else Path(items[0].rel).stem
        out_rel = str(Path(items[0].rel).parent / f"series_{name}.nii.gz")
        h = nifti_io.header_for(vol, None, 16)
        _out_path(job, out_rel).write_bytes(nifti_io.write_nifti(h, vol, gz=True))
        laps.lap("write")
    except Exception as exc:
        laps.lap("error")
        error = _err(exc)
    return [FileRecord(i.rel, InputKind.DICOM.value, stages, "ERROR" if error else "WRITTEN",
                       None if error else out_rel, dict(laps.durations), laps.wall, error)
            for i in items]


def _run_wsi(job: _Job, items: list[_Input]) -> list[FileRecord]:
    stages = list(job.config.stages_for(InputKind.DICOM_WSI))
    laps = _Laps()
    records, pairs = [], []
    for i in items:
        try:
            pairs.append((i.rel, parse_dataset(i.path.read_bytes())))
        except Exception as exc:
            records.append(FileRecord(i.rel, InputKind.DICOM_WSI.value, stages, "ERROR", error=_err(exc)))
    laps.lap("read")
    converted = any(fnmatch.fnmatch(rel, pat) for rel, _ in pairs for pat in job.config.wsi_converted)
    profile = job.profile if "metadata" in stages else None
    study = WsiStudy.from_datasets(pairs, converted)
    if profile is None or "wsi" not in stages:
        # partial stage sets: run the pieces by hand
        actions = []
        for inst in study.instances:
            try:
                ds = inst.dataset
                if profile is not None:
                    ds, audit = apply_profile(ds, profile, job.uid_map, inst.file_id)
                    job.audits.append(audit)
                actions.append((inst.file_id, Disposition.WRITTEN, ds, None))
            except Exception as exc:
                actions.append((inst.file_id, Disposition.ERROR, None, _err(exc)))
    else:
        try:
            result, record = deid_wsi_study(study, profile, job.uid_map,
                                            left_fraction=job.config.overview_left_fraction)
            record.file_id = f"study:{min(rel for rel, _ in pairs)}"
            job.audits.append(record)
            actions = [(a.file_id, a.disposition, a.dataset, a.error or None) for a in result]
        except Exception as exc:
            actions = [(inst.file_id, Disposition.ERROR, None, _err(exc)) for inst in study.instances]
    laps.lap("wsi")
    for rel, disp, ds, error in actions:
        out = None
        if disp is Disposition.WRITTEN:
            try:
                _out_path(job, rel).write_bytes(serialize_dataset(ds, pad_odd=True))
                out = rel
            except Exception as exc:
                disp, error = Disposition.ERROR, _err(exc)
        records.append(FileRecord(rel, InputKind.DICOM_WSI.value, stages, disp.value, out, error=error))
    laps.lap("write")
    for r in records:
        r.durations, r.wall_time = dict(laps.durations), laps.wall
    return records


# ---------------------------------------------------------------------------
# series assembly


def _floats(ds: DataSet, tag, n: int | None = None) -> np.ndarray:
    e = ds.get(tag)
    if e is None:
        raise DicomError(f"missing {Tag(*tag)} for volume assembly")
    v = np.array([float(x) for x in e.values])
    if n is not None and v.size != n:
        raise DicomError(f"{Tag(*tag)} holds {v.size} values, expected {n}")
    return v


LPS_TO_RAS = np.diag([-1.0, -1.0, 1.0, 1.0])


def dicom_series_to_volume(datasets, tol_mm: float = 1e-3) -> Volume:
    """Stack single-frame slices into a RAS volume of shape ``(rows, columns, n)``."""
    datasets = list(datasets)
    if not datasets:
        raise DicomError("empty series")
    series = {ds.text((0x0020, 0x000E)) for ds in datasets}
    if len(series) > 1:
        raise DicomError("instances belong to different series")
    iop = _floats(datasets[0], (0x0020, 0x0037), 6)
    for ds in datasets[1:]:
        if not np.allclose(_floats(ds, (0x0020, 0x0037), 6), iop, atol=1e-4):
            raise DicomError("inconsistent image orientation within series")
    row_dir, col_dir = iop[:3], iop[3:]
    normal = np.cross(row_dir, col_dir)
    positions = np.array([_floats(ds, (0x0020, 0x0032), 3) for ds in datasets])
    proj = positions @ normal
    order = np.argsort(proj, kind="stable")
    proj = proj[order]
    if len(datasets) > 1:
        gaps = np.diff(proj)
        if np.any(gaps <= tol_mm):
            raise DicomError("duplicate slice positions in series")
        if np.ptp(gaps) > tol_mm:
            raise DicomError(f"non-uniform slice spacing (range {np.ptp(gaps):.4g} mm)")
        slice_gap = float(gaps.mean())
    else:
        e = datasets[0].get((0x0018, 0x0088)) or datasets[0].get((0x0018, 0x0050))
        slice_gap = float(e.values[0]) if e is not None and e.values else 1.0
    spacing = _floats(datasets[0], (0x0028, 0x0030), 2)
    slices = []
    for i in order:
        ds = datasets[i]
        arr = pixel_array(ds)
        if arr.shape[0] != 1 or arr.shape[3] != 1:
            raise DicomError("volume assembly needs single-frame grayscale slices")
        slope = float(ds.text((0x0028, 0x1053)) or 1.0)
        inter = float(ds.text((0x0028, 0x1052)) or 0.0)
        slices.append(arr[0, :, :, 0].astype(np.float64) * slope + inter)
    if len({s.shape for s in slices}) != 1:
        raise DicomError("slices differ in size")
    data = np.stack(slices, axis=2)
    A = np.eye(4)
    A[:3, 0] = col_dir * spacing[0]  # row index advances down a column
    A[:3, 1] = row_dir * spacing[1]
    A[:3, 2] = normal * slice_gap
    A[:3, 3] = positions[order[0]]
    return Volume(data, LPS_TO_RAS @ A, 16)


# ---------------------------------------------------------------------------
# driver


def discover(roots) -> list[_Input]:
    roots = [Path(r) for r in roots]
    out = []
    for idx, root in enumerate(roots):
        if root.is_file():
            files, base = [root], root.parent
        else:
            files, base = sorted(p for p in root.rglob("*") if p.is_file()), root
        for p in files:
            rel = p.relative_to(base).as_posix()
            if len(roots) > 1:
                rel = f"{idx}_{root.name}/{rel}"
            out.append(_Input(p, rel))
    return sorted(out, key=lambda i: i.rel)


def _classify(item: _Input) -> _Input:
    try:
        with open(item.path, "rb") as f:
            head = f.read(HEAD_BYTES)
        item.kind = detect_input_type(item.path, head)
    except OSError as exc:
        item.error = _err(exc)
    return item


def _uid_map(config: JobConfig) -> UidMap:
    key = config.uid_key
    if key is None and config.uid_map_path:
        key_path = Path(config.uid_map_path + ".key")
        if key_path.exists():
            key = key_path.read_text().strip()
        else:
            key = secrets.token_hex(32)
            key_path.parent.mkdir(parents=True, exist_ok=True)
            key_path.write_text(key + "\n")
            os.chmod(key_path, 0o600)
    if key is None:
        log.warning("no uid_key or uid_map_path configured; UIDs will differ between runs")
        key = secrets.token_hex(32)
    if config.uid_map_path:
        return UidMap.load(config.uid_map_path, key.encode(), config.uid_root)
    return UidMap(key.encode(), config.uid_root)


def prepare(config: JobConfig) -> _Job:
    """Validate everything that can fail before any output is written."""
    config.validate()
    profile = load_profile_file(config.profile)
    try:
        specs = twix_scrub.specs_from_config(config.twix_fields)
        detector = make_detector(config.detector)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    for root in config.inputs:
        if not Path(root).exists():
            raise ConfigError(f"input root {root} does not exist")
    return _Job(config, profile, _uid_map(config), Path(config.output), specs, detector)


def run_pipeline(config: JobConfig) -> Manifest:
    t0 = time.perf_counter()
    job = prepare(config)
    items = [_classify(i) for i in discover(config.inputs)]
    job.out_root.mkdir(parents=True, exist_ok=True)

    units: list = []
    series: dict[str, list[_Input]] = {}
    studies: dict[str, list[_Input]] = {}
    volumetric = bool(VOLUMETRIC & set(config.stages_for(InputKind.DICOM)))
    records: list[FileRecord] = []
    for item in items:
        if item.error:
            records.append(FileRecord(item.rel, item.kind.value, [], "ERROR", error=item.error))
        elif item.kind is InputKind.DICOM_WSI:
            studies.setdefault(_peek_uid(item, (0x0020, 0x000D)), []).append(item)
        elif item.kind is InputKind.DICOM and volumetric:
            series.setdefault(_peek_uid(item, (0x0020, 0x000E)), []).append(item)
        else:
            units.append((_run_file, item))
    units += [(_run_series, group) for _, group in sorted(series.items())]
    units += [(_run_wsi, group) for _, group in sorted(studies.items())]

    def run(unit):
        fn, arg = unit
        out = fn(job, arg)
        return out if isinstance(out, list) else [out]

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(run, units))
    else:
        results = [run(u) for u in units]
    for r in results:
        records.extend(r)

    manifest = Manifest(sorted(records, key=lambda r: r.input), time.perf_counter() - t0)
    manifest.write(job.out_root / "manifest.jsonl")
    audits = sorted(job.audits, key=lambda a: (a.file_id, a.profile))
    (job.out_root / "audit.jsonl").write_text(
        "".join(json.dumps(a.to_dict(), sort_keys=True) + "\n" for a in audits))
    if config.uid_map_path:
        job.uid_map.save(config.uid_map_path)
    return manifest


def _peek_uid(item: _Input, tag) -> str:
    """Grouping key; unreadable files get a key of their own so they fail alone."""
    try:
        with open(item.path, "rb") as f:
            ds = parse_dataset(f.read(), stop_before=(tag[0], tag[1] + 1))
        return ds.text(tag) or f"~{item.rel}"
    except (OSError, DicomError):
        return f"~{item.rel}"


# ---------------------------------------------------------------------------
# inspection


MASK = "***"


def inspect_file(path, profile: DeidProfile | None = None) -> list[str]:
    """Kind plus a header summary; values the profile would not keep are masked."""
    from .deid_rules import builtin_profile

    profile = profile or builtin_profile("basic")
    path = Path(path)
    data = path.read_bytes()
    kind = detect_input_type(path, data[:HEAD_BYTES])
    lines = [f"kind: {kind.value}", f"size: {len(data)} bytes"]
    if kind in (InputKind.DICOM, InputKind.DICOM_WSI):
        ds = parse_dataset(data)
        lines.append(f"transfer syntax: {ds.transfer_syntax_uid}")
        for p, e in [((m.tag,), m) for m in ds.meta] + list(ds.walk()):
            depth = sum(1 for x in p if isinstance(x, int))
            if e.is_sequence:
                shown = f"<{len(e.items)} items>"
            elif e.undefined_length or e.vr in ("OB", "OW", "OF", "OD", "OL", "OV", "UN"):
                shown = "<binary>"
            elif action_for_tag(profile, e.tag) is ActionCode.KEEP:
                shown = _numeric(e) if e.vr in _NUMERIC else e.text
            else:
                shown = MASK
            lines.append(f"{'  ' * depth}{e.tag} {e.vr} {e.tag.keyword}: {shown}")
    elif kind is InputKind.NIFTI:
        h, vol = nifti_io.read_nifti(data)
        lines += [f"shape: {vol.shape}", f"datatype: {int(h['datatype'])}",
                  f"pixdim: {[round(float(x), 4) for x in h['pixdim'][1:4]]}",
                  f"qform_code: {int(h['qform_code'])}", f"sform_code: {int(h['sform_code'])}",
                  f"orientation: {_orient(vol)}", f"extensions: {len(h.extensions)} bytes"]
        for name in nifti_io.FREE_TEXT_FIELDS:
            filled = bool(h.field_bytes(name).strip(b"\x00"))
            lines.append(f"{name}: {MASK if filled else ''}")
    elif kind is InputKind.TWIX:
        matches = twix_scrub.locate_phi_fields(data)
        lines.append(f"text regions: {len(twix_scrub.ascii_regions(data))}")
        for m in matches:
            lines.append(f"{m.spec.key} @ {m.offset} ({m.length} bytes): {MASK}")
    elif kind is InputKind.IMAGE2D:
        img = decode_png(data)
        lines += [f"size: {img.width}x{img.height}", f"channels: {img.channels}",
                  f"dtype: {img.pixels.dtype}"]
    return lines


_NUMERIC = {"US": "<u2", "UL": "<u4", "SS": "<i2", "SL": "<i4", "FL": "<f4", "FD": "<f8"}


def _numeric(e) -> str:
    n = np.dtype(_NUMERIC[e.vr]).itemsize
    values = np.frombuffer(e.value[:len(e.value) // n * n], dtype=_NUMERIC[e.vr])
    return "\\".join(f"{v:g}" for v in values.tolist())


def _orient(vol: Volume) -> str:
    from .volume_ops import OrientationError, orientation_string

    try:
        return orientation_string(vol.affine)
    except OrientationError:
        return "oblique/degenerate"


def strip_volatile(line: str) -> str:
    """Manifest/audit line with timing fields removed, for run-to-run comparison."""
    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items() if k not in VOLATILE_FIELDS}
        if isinstance(obj, list):
            return [clean(v) for v in obj]
        return obj
    return json.dumps(clean(json.loads(line)), sort_keys=True)
