"""De-identification of DICOM whole-slide-image instance sets."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .deid_rules import AuditEntry, AuditRecord, DeidProfile, UidMap, apply_profile
from .dicom_core import DataSet, DicomError
from .pixels import PixelDataUnsupported, pixel_array, with_pixel_array

IMAGE_TYPE = (0x0008, 0x0008)


class WsiRole(str, enum.Enum):
    VOLUME = "VOLUME"
    LABEL = "LABEL"
    OVERVIEW = "OVERVIEW"
    UNKNOWN = "UNKNOWN"


class Disposition(str, enum.Enum):
    WRITTEN = "WRITTEN"
    DROPPED = "DROPPED"
    ERROR = "ERROR"


@dataclass
class WsiInstance:
    file_id: str
    dataset: DataSet
    role: WsiRole = WsiRole.UNKNOWN


@dataclass
class WsiStudy:
    instances: list
    converted: bool = False

    @classmethod
    def from_datasets(cls, pairs, converted: bool = False) -> "WsiStudy":
        return cls([WsiInstance(fid, ds, classify_wsi_instance(ds)) for fid, ds in pairs], converted)

    def check(self) -> None:
        for role in (WsiRole.LABEL, WsiRole.OVERVIEW):
            n = sum(1 for i in self.instances if i.role is role)
            if n > 1:
                raise DicomError(f"study holds {n} {role.value} instances; at most one expected")


@dataclass
class FileAction:
    file_id: str
    role: WsiRole
    disposition: Disposition
    dataset: DataSet | None = None
    steps: list = field(default_factory=list)
    error: str = ""


def classify_wsi_instance(ds: DataSet) -> WsiRole:
    e = ds.get(IMAGE_TYPE)
    if e is None:
        return WsiRole.UNKNOWN
    values = {v.strip().upper() for v in e.values}
    for role in (WsiRole.LABEL, WsiRole.OVERVIEW, WsiRole.VOLUME):
        if role.value in values:
            return role
    return WsiRole.UNKNOWN


def blank_label(ds: DataSet) -> DataSet:
    """Zero every pixel of a label image; nothing outside the pixel element changes."""
    arr = pixel_array(ds)
    return with_pixel_array(ds, np.zeros_like(arr))


def redact_overview(ds: DataSet, left_fraction: float = 0.5) -> DataSet:
    """Zero columns ``[0, ceil(left_fraction * columns))`` in every frame and channel."""
    if not 0.0 < left_fraction <= 1.0:
        raise ValueError("left_fraction must lie in (0, 1]")
    arr = pixel_array(ds)
    cut = math.ceil(left_fraction * arr.shape[2])
    arr[:, :, :cut, :] = 0
    return with_pixel_array(ds, arr)


def _process(inst: WsiInstance, converted: bool, profile, uid_map, left_fraction):
    steps = ["metadata"]
    try:
        if inst.role is WsiRole.LABEL and converted:
            return FileAction(inst.file_id, inst.role, Disposition.DROPPED, None, [],
                              "label of a converted study"), None
        ds = inst.dataset
        if inst.role is WsiRole.LABEL:
            try:
                ds = blank_label(ds)
                steps.append("blank-label")
            except PixelDataUnsupported as exc:
                return FileAction(inst.file_id, inst.role, Disposition.DROPPED, None, [],
                                  f"label pixels unsupported: {exc}"), None
        elif inst.role is WsiRole.OVERVIEW:
            ds = redact_overview(ds, left_fraction)
            steps.append("redact-overview")
        ds, audit = apply_profile(ds, profile, uid_map, inst.file_id)
        return FileAction(inst.file_id, inst.role, Disposition.WRITTEN, ds, steps), audit
    except Exception as exc:  # isolate per-instance failures
        return FileAction(inst.file_id, inst.role, Disposition.ERROR, None, steps,
                          f"{type(exc).__name__}: {exc}"), None


def deid_wsi_study(study: WsiStudy, profile: DeidProfile, uid_map: UidMap, *,
                   left_fraction: float = 0.5, workers: int = 1) -> tuple[list[FileAction], AuditRecord]:
    """Process every instance; the study audit lists each file's disposition and its element actions."""
    study.check()
    run = lambda inst: _process(inst, study.converted, profile, uid_map, left_fraction)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, study.instances))
    else:
        results = [run(i) for i in study.instances]
    record = AuditRecord(file_id="study", profile=profile.name)
    actions = []
    for action, audit in results:
        actions.append(action)
        record.entries.append(AuditEntry(action.file_id, action.role.value,
                                         action.disposition.value.lower(), action.error))
        if audit is not None:
            record.entries.extend(AuditEntry(f"{action.file_id}:{e.path}", e.action, e.disposition, e.note)
                                  for e in audit.entries)
    return actions, record
