"""Native (uncompressed) DICOM pixel data as numpy arrays."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .dicom_core import PIXEL_DATA, DataSet, DicomError, Element, replace_element

ROWS = (0x0028, 0x0010)
COLUMNS = (0x0028, 0x0011)
SAMPLES = (0x0028, 0x0002)
PLANAR = (0x0028, 0x0006)
FRAMES = (0x0028, 0x0008)
BITS_ALLOCATED = (0x0028, 0x0100)
PIXEL_REPRESENTATION = (0x0028, 0x0103)


class PixelDataUnsupported(DicomError):
    pass


def _int(ds: DataSet, tag, default=None) -> int:
    e = ds.get(tag)
    if e is None or not e.value:
        if default is None:
            raise PixelDataUnsupported(f"missing {tag} needed to decode pixels")
        return default
    return e.uint()


def pixel_geometry(ds: DataSet) -> dict:
    return {
        "rows": _int(ds, ROWS),
        "columns": _int(ds, COLUMNS),
        "samples": _int(ds, SAMPLES, 1),
        "planar": _int(ds, PLANAR, 0),
        "frames": _int(ds, FRAMES, 1),
        "bits": _int(ds, BITS_ALLOCATED),
        "signed": _int(ds, PIXEL_REPRESENTATION, 0) == 1,
    }


def _pixel_element(ds: DataSet) -> Element:
    e = ds.get(PIXEL_DATA)
    if e is None:
        raise PixelDataUnsupported("no pixel data element")
    if e.undefined_length or e.is_sequence:
        raise PixelDataUnsupported("encapsulated (compressed) pixel data; drop the instance instead")
    return e


def _dtype(g) -> np.dtype:
    if g["bits"] == 8:
        return np.dtype("i1" if g["signed"] else "u1")
    if g["bits"] == 16:
        return np.dtype("<i2" if g["signed"] else "<u2")
    if g["bits"] == 32:
        return np.dtype("<i4" if g["signed"] else "<u4")
    raise PixelDataUnsupported(f"bits allocated {g['bits']} not supported")


def pixel_array(ds: DataSet) -> np.ndarray:
    """Pixels as ``(frames, rows, columns, samples)``, always sample-interleaved."""
    e = _pixel_element(ds)
    g = pixel_geometry(ds)
    dt = _dtype(g)
    n = g["frames"] * g["rows"] * g["columns"] * g["samples"]
    if len(e.value) < n * dt.itemsize:
        raise PixelDataUnsupported(f"pixel data holds {len(e.value)} bytes, geometry needs {n * dt.itemsize}")
    flat = np.frombuffer(e.value, dtype=dt, count=n)
    if g["samples"] > 1 and g["planar"] == 1:
        return flat.reshape(g["frames"], g["samples"], g["rows"], g["columns"]).transpose(0, 2, 3, 1).copy()
    return flat.reshape(g["frames"], g["rows"], g["columns"], g["samples"]).copy()


def with_pixel_array(ds: DataSet, arr: np.ndarray) -> DataSet:
    """Write ``arr`` back into the pixel element; trailing padding bytes are kept."""
    e = _pixel_element(ds)
    g = pixel_geometry(ds)
    dt = _dtype(g)
    arr = np.asarray(arr)
    expect = (g["frames"], g["rows"], g["columns"], g["samples"])
    if arr.shape != expect:
        raise ValueError(f"array shape {arr.shape} does not match geometry {expect}")
    if g["samples"] > 1 and g["planar"] == 1:
        arr = arr.transpose(0, 3, 1, 2)
    raw = np.ascontiguousarray(arr, dtype=dt).tobytes()
    return replace_element(ds, replace(e, value=raw + e.value[len(raw):]))
