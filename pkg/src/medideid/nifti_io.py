"""NIfTI-1 single-file (.nii / .nii.gz) reading, writing and header scrubbing."""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field

import numpy as np

HEADER_SIZE = 348

_HEADER_FIELDS = [
    ("sizeof_hdr", "i4"), ("data_type", "S10"), ("db_name", "S18"), ("extents", "i4"),
    ("session_error", "i2"), ("regular", "S1"), ("dim_info", "u1"), ("dim", "i2", (8,)),
    ("intent_p1", "f4"), ("intent_p2", "f4"), ("intent_p3", "f4"), ("intent_code", "i2"),
    ("datatype", "i2"), ("bitpix", "i2"), ("slice_start", "i2"), ("pixdim", "f4", (8,)),
    ("vox_offset", "f4"), ("scl_slope", "f4"), ("scl_inter", "f4"), ("slice_end", "i2"),
    ("slice_code", "u1"), ("xyzt_units", "u1"), ("cal_max", "f4"), ("cal_min", "f4"),
    ("slice_duration", "f4"), ("toffset", "f4"), ("glmax", "i4"), ("glmin", "i4"),
    ("descrip", "S80"), ("aux_file", "S24"), ("qform_code", "i2"), ("sform_code", "i2"),
    ("quatern_b", "f4"), ("quatern_c", "f4"), ("quatern_d", "f4"),
    ("qoffset_x", "f4"), ("qoffset_y", "f4"), ("qoffset_z", "f4"),
    ("srow_x", "f4", (4,)), ("srow_y", "f4", (4,)), ("srow_z", "f4", (4,)),
    ("intent_name", "S16"), ("magic", "S4"),
]


def header_dtype(byteorder: str = "<") -> np.dtype:
    return np.dtype([(f[0], byteorder + f[1], *f[2:]) for f in _HEADER_FIELDS])


assert header_dtype().itemsize == HEADER_SIZE

# datatype code -> (numpy type, bitpix)
DATATYPES = {
    2: (np.uint8, 8),
    4: (np.int16, 16),
    8: (np.int32, 32),
    16: (np.float32, 32),
    64: (np.float64, 64),
}

FREE_TEXT_FIELDS = ("descrip", "aux_file", "intent_name", "db_name")
GEOMETRY_FIELDS = ("dim", "pixdim", "qform_code", "sform_code", "quatern_b", "quatern_c",
                   "quatern_d", "qoffset_x", "qoffset_y", "qoffset_z",
                   "srow_x", "srow_y", "srow_z")


class NiftiError(ValueError):
    pass


class NiftiFormatError(NiftiError):
    pass


class NiftiUnsupportedError(NiftiError):
    pass


@dataclass
class NiftiHeader:
    fields: np.ndarray  # 0-d structured array, dtype from header_dtype()
    extensions: bytes = b""  # bytes 348..vox_offset (extender + extension blocks)

    def __getitem__(self, name):
        return self.fields[name]

    def __setitem__(self, name, value):
        self.fields[name] = value

    @property
    def byteorder(self) -> str:
        return self.fields.dtype["sizeof_hdr"].byteorder

    def copy(self) -> "NiftiHeader":
        return NiftiHeader(self.fields.copy(), self.extensions)

    def tobytes(self) -> bytes:
        return self.fields.tobytes()

    def field_bytes(self, name: str) -> bytes:
        return np.asarray(self.fields[name]).tobytes()


@dataclass
class Volume:
    """3D scalar grid with a voxel-index -> world (mm, RAS+) affine."""

    data: np.ndarray
    affine: np.ndarray
    source_dtype: int = 64
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def spacing(self) -> np.ndarray:
        return np.sqrt((self.affine[:3, :3] ** 2).sum(axis=0))


def new_header(shape=(1, 1, 1), datatype: int = 16, affine=None) -> NiftiHeader:
    """A minimal valid single-file header."""
    h = NiftiHeader(np.zeros((), dtype=header_dtype()))
    h["sizeof_hdr"] = HEADER_SIZE
    h["magic"] = b"n+1"
    h["dim"] = [3, *shape, 1, 1, 1, 1]
    h["datatype"] = datatype
    h["bitpix"] = DATATYPES[datatype][1]
    h["pixdim"] = [1, 1, 1, 1, 1, 1, 1, 1]
    h["vox_offset"] = 352
    h["scl_slope"] = 1
    h["xyzt_units"] = 2  # mm
    if affine is not None:
        _set_affine(h, np.asarray(affine, dtype=float))
    return h


def _maybe_gunzip(data: bytes, gz: bool | None) -> bytes:
    if gz or (gz is None and data[:2] == b"\x1f\x8b"):
        return gzip.decompress(data)
    return data


def parse_header(data: bytes) -> NiftiHeader:
    if len(data) < HEADER_SIZE:
        raise NiftiFormatError(f"file too short for a NIfTI-1 header ({len(data)} bytes)")
    for order in "<>":
        if int(np.frombuffer(data, dtype=order + "i4", count=1)[0]) == HEADER_SIZE:
            break
    else:
        raise NiftiFormatError("sizeof_hdr is not 348")
    fields = np.frombuffer(data[:HEADER_SIZE], dtype=header_dtype(order)).reshape(()).copy()
    h = NiftiHeader(fields)
    magic = bytes(h["magic"]).rstrip(b"\x00")
    if magic not in (b"n+1", b"ni1"):
        raise NiftiFormatError(f"bad magic {magic!r}")
    ndim = int(h["dim"][0])
    if not 1 <= ndim <= 7:
        raise NiftiFormatError(f"dim[0]={ndim} outside 1..7")
    code = int(h["datatype"])
    if code not in DATATYPES:
        raise NiftiUnsupportedError(f"unsupported datatype code {code}")
    if int(h["bitpix"]) != DATATYPES[code][1]:
        raise NiftiFormatError(f"bitpix {int(h['bitpix'])} does not match datatype {code}")
    vox = int(h["vox_offset"])
    if vox > HEADER_SIZE:
        h.extensions = bytes(data[HEADER_SIZE:vox])
    return h


def quaternion_to_matrix(b: float, c: float, d: float) -> np.ndarray:
    a2 = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(a2) if a2 > 1e-7 else 0.0
    if a == 0.0:
        n = np.sqrt(b * b + c * c + d * d)
        b, c, d = b / n, c / n, d / n
    return np.array([
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b],
    ])


def matrix_to_quaternion(R: np.ndarray) -> tuple[float, float, float]:
    """Inverse of ``quaternion_to_matrix`` for a proper rotation, with a >= 0."""
    a = R.trace() + 1.0
    if a > 0.5:
        a = 0.5 * np.sqrt(a)
        b = 0.25 * (R[2, 1] - R[1, 2]) / a
        c = 0.25 * (R[0, 2] - R[2, 0]) / a
        d = 0.25 * (R[1, 0] - R[0, 1]) / a
    else:
        xd = 1.0 + R[0, 0] - (R[1, 1] + R[2, 2])
        yd = 1.0 + R[1, 1] - (R[0, 0] + R[2, 2])
        zd = 1.0 + R[2, 2] - (R[0, 0] + R[1, 1])
        if xd > 1.0:
            b = 0.5 * np.sqrt(xd)
            c = 0.25 * (R[0, 1] + R[1, 0]) / b
            d = 0.25 * (R[0, 2] + R[2, 0]) / b
            a = 0.25 * (R[2, 1] - R[1, 2]) / b
        elif yd > 1.0:
            c = 0.5 * np.sqrt(yd)
            b = 0.25 * (R[0, 1] + R[1, 0]) / c
            d = 0.25 * (R[1, 2] + R[2, 1]) / c
            a = 0.25 * (R[0, 2] - R[2, 0]) / c
        else:
            d = 0.5 * np.sqrt(zd)
            b = 0.25 * (R[0, 2] + R[2, 0]) / d
            c = 0.25 * (R[1, 2] + R[2, 1]) / d
            a = 0.25 * (R[1, 0] - R[0, 1]) / d
        if a < 0:
            b, c, d = -b, -c, -d
    return float(b), float(c), float(d)


def header_affine(h: NiftiHeader) -> np.ndarray:
    """sform if sform_code > 0, else qform if qform_code > 0, else pixdim scaling."""
    pix = h["pixdim"].astype(np.float64)
    if int(h["sform_code"]) > 0:
        A = np.eye(4)
        A[0] = h["srow_x"].astype(np.float64)
        A[1] = h["srow_y"].astype(np.float64)
        A[2] = h["srow_z"].astype(np.float64)
        return A
    if int(h["qform_code"]) > 0:
        R = quaternion_to_matrix(float(h["quatern_b"]), float(h["quatern_c"]),
                                 float(h["quatern_d"]))
        qfac = -1.0 if pix[0] < 0 else 1.0
        A = np.eye(4)
        A[:3, :3] = R * np.array([pix[1], pix[2], qfac * pix[3]])
        A[:3, 3] = [float(h["qoffset_x"]), float(h["qoffset_y"]), float(h["qoffset_z"])]
        return A
    return np.diag([pix[1] or 1.0, pix[2] or 1.0, pix[3] or 1.0, 1.0])


def _set_affine(h: NiftiHeader, A: np.ndarray) -> None:
    h["srow_x"], h["srow_y"], h["srow_z"] = A[0], A[1], A[2]
    if int(h["sform_code"]) <= 0:
        h["sform_code"] = 2
    zooms = np.sqrt((A[:3, :3] ** 2).sum(axis=0))
    zooms[zooms == 0] = 1.0
    R = A[:3, :3] / zooms
    u, _, vt = np.linalg.svd(R)
    R = u @ vt
    qfac = 1.0
    if np.linalg.det(R) < 0:
        R[:, 2] *= -1
        qfac = -1.0
    h["quatern_b"], h["quatern_c"], h["quatern_d"] = matrix_to_quaternion(R)
    h["qoffset_x"], h["qoffset_y"], h["qoffset_z"] = A[:3, 3]
    pix = h["pixdim"].copy()
    pix[0] = qfac
    pix[1:4] = zooms
    h["pixdim"] = pix
    if int(h["qform_code"]) <= 0:
        h["qform_code"] = int(h["sform_code"])


def _scaling(h: NiftiHeader) -> tuple[float, float]:
    slope = float(h["scl_slope"])
    inter = float(h["scl_inter"])
    if slope == 0 or not np.isfinite(slope):
        return 1.0, 0.0
    return slope, inter if np.isfinite(inter) else 0.0


def read_nifti(data: bytes, gz: bool | None = None) -> tuple[NiftiHeader, Volume]:
    """Decode a single-file NIfTI-1 image; ``gz=None`` sniffs gzip magic."""
    data = _maybe_gunzip(bytes(data), gz)
    h = parse_header(data)
    dims = [int(x) for x in h["dim"][1:int(h["dim"][0]) + 1]]
    if any(d < 1 for d in dims):
        raise NiftiFormatError(f"non-positive dimension in {dims}")
    if any(d != 1 for d in dims[3:]):
        raise NiftiUnsupportedError(f"only 3D volumes are supported, got dims {dims}")
    shape = tuple((dims + [1, 1, 1])[:3])
    dtype = np.dtype(DATATYPES[int(h["datatype"])][0]).newbyteorder(h.byteorder)
    offset = max(int(h["vox_offset"]), HEADER_SIZE)
    count = int(np.prod(shape))
    if offset + count * dtype.itemsize > len(data):
        raise NiftiFormatError("data section shorter than declared dimensions")
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(shape, order="F")
    slope, inter = _scaling(h)
    values = raw.astype(np.float64)
    if (slope, inter) != (1.0, 0.0):
        values = slope * values + inter
    return h, Volume(values, header_affine(h), int(h["datatype"]))


def scrub_nifti_header(h: NiftiHeader, *, drop_extensions: bool = True) -> NiftiHeader:
    """Zero free-text fields; geometry is left bit-identical.

    Header extensions (which can embed a whole DICOM header) are dropped by
    default.
    """
    out = h.copy()
    for name in FREE_TEXT_FIELDS:
        out[name] = b""
    if drop_extensions and out.extensions:
        out.extensions = b""
        out["vox_offset"] = 352
    return out


def _encode_data(h: NiftiHeader, vol: Volume) -> bytes:
    np_type = DATATYPES[int(h["datatype"])][0]
    slope, inter = _scaling(h)
    values = np.asarray(vol.data, dtype=np.float64)
    if (slope, inter) != (1.0, 0.0):
        values = (values - inter) / slope
    if np.issubdtype(np_type, np.integer):
        info = np.iinfo(np_type)
        values = np.clip(np.rint(values), info.min, info.max)
    out = values.astype(np.dtype(np_type).newbyteorder(h.byteorder))
    return out.tobytes(order="F")


def write_nifti(h: NiftiHeader, vol: Volume, *, gz: bool = False) -> bytes:
    """Encode ``vol`` using ``h``; the affine is written into sform/qform if it changed."""
    dims = [int(x) for x in h["dim"][1:int(h["dim"][0]) + 1]]
    dims = tuple((dims + [1, 1, 1])[:3])
    if dims != tuple(vol.shape) or int(h["dim"][0]) > 3 and any(
            int(x) != 1 for x in h["dim"][4:int(h["dim"][0]) + 1]):
        raise NiftiError(f"volume shape {vol.shape} does not match header dims {dims}")
    h = h.copy()
    if int(h["datatype"]) not in DATATYPES:
        raise NiftiUnsupportedError(f"unsupported datatype code {int(h['datatype'])}")
    if not np.array_equal(header_affine(h), vol.affine):
        _set_affine(h, np.asarray(vol.affine, dtype=np.float64))
    ext = h.extensions or b"\x00\x00\x00\x00"
    h["vox_offset"] = max(float(h["vox_offset"]), HEADER_SIZE + len(ext))
    pad = bytes(int(h["vox_offset"]) - HEADER_SIZE - len(ext))
    out = h.tobytes() + ext + pad + _encode_data(h, vol)
    return gzip.compress(out, compresslevel=6, mtime=0) if gz else out


def header_for(vol: Volume, template: NiftiHeader | None = None,
               datatype: int | None = None) -> NiftiHeader:
    """Header matching ``vol``'s shape and datatype, copying non-geometry fields from ``template``."""
    h = template.copy() if template is not None else new_header(vol.shape)
    code = datatype or vol.source_dtype
    if code not in DATATYPES:
        code = 64
    if tuple(int(x) for x in h["dim"][1:4]) != tuple(vol.shape) or int(h["dim"][0]) != 3:
        h["dim"] = [3, *vol.shape, 1, 1, 1, 1]
    if int(h["datatype"]) != code:
        h["datatype"] = code
        h["bitpix"] = DATATYPES[code][1]
        h["scl_slope"], h["scl_inter"] = 1.0, 0.0
    if not np.array_equal(header_affine(h), vol.affine):
        _set_affine(h, np.asarray(vol.affine, dtype=np.float64))
    return h


def load(path) -> tuple[NiftiHeader, Volume]:
    with open(path, "rb") as f:
        return read_nifti(f.read())


def save(path, h: NiftiHeader, vol: Volume) -> None:
    path = str(path)
    with open(path, "wb") as f:
        f.write(write_nifti(h, vol, gz=path.endswith(".gz")))
