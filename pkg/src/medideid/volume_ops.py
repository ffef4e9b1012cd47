"""Pixel-domain anonymization of head volumes.

Deterministic morphology stands in for a learned model: Otsu foreground,
erosion to cut thin bridges, the largest 26-connected component, dilation
back and hole filling. Defacing zeroes a box in front of and below the brain
mask. All distances are in millimetres and honour anisotropic voxels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .nifti_io import Volume


class OrientationError(ValueError):
    pass


class StripError(ValueError):
    pass


class DefaceError(ValueError):
    pass


@dataclass(frozen=True)
class StripParams:
    erosion_radius_mm: float = 3.0
    dilation_radius_mm: float = 3.0
    threshold_mode: str = "otsu"
    threshold_value: float | None = None  # used when threshold_mode == "fixed"

    def __post_init__(self):
        if self.erosion_radius_mm < 0 or self.dilation_radius_mm < 0:
            raise ValueError("radii must be >= 0")
        if self.threshold_mode not in ("otsu", "fixed"):
            raise ValueError(f"unknown threshold mode {self.threshold_mode!r}")
        if self.threshold_mode == "fixed" and self.threshold_value is None:
            raise ValueError("fixed threshold mode needs threshold_value")


@dataclass(frozen=True)
class DefaceParams:
    anterior_margin_mm: float = 5.0
    inferior_fraction: float = 0.5

    def __post_init__(self):
        if self.anterior_margin_mm < 0:
            raise ValueError("anterior margin must be >= 0")
        if not 0.0 <= self.inferior_fraction <= 1.0:
            raise ValueError("inferior fraction must lie in [0, 1]")


# ---------------------------------------------------------------------------
# orientation


def axis_codes(affine: np.ndarray) -> list[tuple[int, int]]:
    """For each voxel axis, (world axis, sign) of its dominant direction."""
    R = np.asarray(affine, dtype=float)[:3, :3]
    if abs(np.linalg.det(R)) < 1e-12:
        raise OrientationError("affine is singular")
    out = []
    for col in R.T:
        world = int(np.argmax(np.abs(col)))
        out.append((world, 1 if col[world] > 0 else -1))
    if len({w for w, _ in out}) != 3:
        raise OrientationError(f"two voxel axes share a dominant world axis: {out}")
    return out


def orientation_string(affine: np.ndarray) -> str:
    letters = ("LR", "PA", "IS")
    return "".join(letters[w][s > 0] for w, s in axis_codes(affine))


def reorient_to_ras(vol: Volume) -> Volume:
    """Permute/flip voxel axes so axes 0,1,2 point along +R, +A, +S.

    World coordinates of every voxel are unchanged; the affine compensates.
    """
    codes = axis_codes(vol.affine)
    if codes == [(0, 1), (1, 1), (2, 1)]:
        return vol
    # perm[j] = input axis that becomes output axis j
    perm = [next(i for i, (w, _) in enumerate(codes) if w == j) for j in range(3)]
    data = np.transpose(vol.data, perm)
    shape = data.shape
    T = np.zeros((4, 4))
    T[3, 3] = 1.0
    flips = []
    for j, i in enumerate(perm):
        if codes[i][1] < 0:
            flips.append(j)
            T[i, j] = -1.0
            T[i, 3] = shape[j] - 1
        else:
            T[i, j] = 1.0
    if flips:
        data = np.flip(data, axis=tuple(flips))
    return Volume(np.ascontiguousarray(data), vol.affine @ T, vol.source_dtype, dict(vol.meta))


def voxel_to_world(affine: np.ndarray, idx: np.ndarray) -> np.ndarray:
    idx = np.asarray(idx, dtype=float)
    return idx @ affine[:3, :3].T + affine[:3, 3]


# ---------------------------------------------------------------------------
# thresholding and morphology


def otsu_threshold(vol, bins: int = 256) -> float:
    """Cut maximizing between-class variance on a histogram of finite values.

    Ties over a plateau of equally good cuts resolve to its midpoint.
    """
    data = vol.data if isinstance(vol, Volume) else np.asarray(vol)
    values = data[np.isfinite(data)].astype(np.float64)
    if values.size == 0:
        raise ValueError("volume has no finite values")
    lo, hi = values.min(), values.max()
    if lo == hi:
        raise ValueError("constant volume has no threshold")
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    centers = (edges[:-1] + edges[1:]) / 2
    w0 = np.cumsum(counts)[:-1].astype(np.float64)
    s0 = np.cumsum(counts * centers)[:-1]
    total, stotal = counts.sum(), (counts * centers).sum()
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    m0 = np.where(valid, s0 / np.where(w0 > 0, w0, 1), 0)
    m1 = np.where(valid, (stotal - s0) / np.where(w1 > 0, w1, 1), 0)
    between = np.where(valid, w0 * w1 * (m0 - m1) ** 2, -1.0)
    best = between.max()
    cuts = np.flatnonzero(between >= best * (1 - 1e-12))
    # cut k separates bins [0, k] from [k+1, ...]; its threshold is edges[k + 1]
    return float((edges[cuts[0] + 1] + edges[cuts[-1] + 1]) / 2)


def ball(radius_mm: float, spacing) -> np.ndarray:
    """Euclidean ball in voxel units for (possibly anisotropic) ``spacing``."""
    spacing = np.asarray(spacing, dtype=float)
    half = np.floor(radius_mm / spacing + 1e-9).astype(int)
    grids = np.meshgrid(*[np.arange(-h, h + 1) * s for h, s in zip(half, spacing)], indexing="ij")
    return sum(g ** 2 for g in grids) <= radius_mm ** 2 + 1e-9


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 6:
        return ndimage.generate_binary_structure(3, 1)
    if connectivity == 26:
        return ndimage.generate_binary_structure(3, 3)
    raise ValueError(f"connectivity must be 6 or 26, got {connectivity}")


def largest_component(mask: np.ndarray, connectivity: int = 26) -> np.ndarray:
    """The largest connected component; ties go to the lexicographically first seed."""
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=_structure(connectivity))
    if n == 0:
        return np.zeros_like(mask)
    sizes = np.bincount(labels.ravel())[1:]
    # labels are numbered in C-order raster scan, so the first maximum has the smallest seed
    return labels == int(np.argmax(sizes)) + 1


def erode(mask: np.ndarray, radius_mm: float, spacing) -> np.ndarray:
    if radius_mm <= 0:
        return np.asarray(mask, dtype=bool).copy()
    return ndimage.binary_erosion(mask, structure=ball(radius_mm, spacing), border_value=0)


def dilate(mask: np.ndarray, radius_mm: float, spacing) -> np.ndarray:
    if radius_mm <= 0:
        return np.asarray(mask, dtype=bool).copy()
    return ndimage.binary_dilation(mask, structure=ball(radius_mm, spacing))


def skull_strip(vol: Volume, params: StripParams = StripParams()) -> np.ndarray:
    """Brain mask: threshold, erode, keep largest component, dilate, fill holes."""
    data = np.nan_to_num(np.asarray(vol.data, dtype=np.float64))
    if params.threshold_mode == "fixed":
        t = float(params.threshold_value)
    else:
        try:
            t = otsu_threshold(data)
        except ValueError as exc:
            raise StripError(f"no foreground to strip: {exc}") from exc
    foreground = data > t
    spacing = vol.spacing
    core = erode(foreground, params.erosion_radius_mm, spacing)
    if not core.any():
        raise StripError("foreground vanished after erosion; use a smaller erosion radius")
    core = largest_component(core, 26)
    brain = dilate(core, params.dilation_radius_mm, spacing)
    return ndimage.binary_fill_holes(brain)


def face_region(vol: Volume, brain: np.ndarray, params: DefaceParams = DefaceParams()) -> np.ndarray:
    """Voxels in front of the brain's anterior margin and below the cut height."""
    brain = np.asarray(brain, dtype=bool)
    if brain.shape != vol.shape:
        raise DefaceError(f"mask shape {brain.shape} differs from volume {vol.shape}")
    if not brain.any():
        raise DefaceError("empty brain mask; cannot localize the face")
    A = vol.affine
    idx = np.indices(vol.shape, dtype=np.float64)
    ant = A[1, 0] * idx[0] + A[1, 1] * idx[1] + A[1, 2] * idx[2] + A[1, 3]
    sup = A[2, 0] * idx[0] + A[2, 1] * idx[1] + A[2, 2] * idx[2] + A[2, 3]
    brain_ant, brain_sup = ant[brain], sup[brain]
    cut_ant = brain_ant.max() - params.anterior_margin_mm
    cut_sup = brain_sup.mean() + params.inferior_fraction * (brain_sup.max() - brain_sup.min())
    return (ant > cut_ant) & (sup < cut_sup) & ~brain


def deface(vol: Volume, brain: np.ndarray, params: DefaceParams = DefaceParams()) -> Volume:
    """Zero the face region; brain voxels and everything else are untouched."""
    region = face_region(vol, brain, params)
    data = np.array(vol.data, copy=True)
    data[region] = 0
    return Volume(data, vol.affine.copy(), vol.source_dtype, dict(vol.meta))


def dice_score(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total
