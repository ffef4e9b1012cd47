"""Analytic head phantoms with known brain, nose and occiput voxel sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nifti_io import Volume


@dataclass(frozen=True)
class HeadPhantomSpec:
    size: int = 64
    spacing_mm: float = 2.0
    brain_radius_mm: float = 40.0
    csf_gap_mm: float = 6.0
    shell_mm: float = 4.0
    brain_value: float = 100.0
    shell_value: float = 160.0
    with_nose: bool = True
    with_occiput: bool = True
    noise_sigma: float = 0.0
    seed: int = 0


@dataclass
class HeadPhantom:
    volume: Volume
    brain: np.ndarray
    shell: np.ndarray
    nose: np.ndarray
    occiput: np.ndarray


def centered_affine(size: int, spacing: float) -> np.ndarray:
    """RAS affine with world origin at the grid centre."""
    A = np.diag([spacing, spacing, spacing, 1.0])
    A[:3, 3] = -spacing * (size - 1) / 2
    return A


def world_grid(size: int, spacing: float):
    c = (np.arange(size) - (size - 1) / 2) * spacing
    return np.meshgrid(c, c, c, indexing="ij")


def _box(x, y, z, xr, yr, zr):
    return (x >= xr[0]) & (x <= xr[1]) & (y >= yr[0]) & (y <= yr[1]) & (z >= zr[0]) & (z <= zr[1])


def head_phantom(spec: HeadPhantomSpec = HeadPhantomSpec()) -> HeadPhantom:
    x, y, z = world_grid(spec.size, spec.spacing_mm)
    r = np.sqrt(x ** 2 + y ** 2 + z ** 2)
    inner = spec.brain_radius_mm + spec.csf_gap_mm
    outer = inner + spec.shell_mm
    brain = r <= spec.brain_radius_mm
    shell = (r >= inner) & (r <= outer)
    empty = np.zeros_like(brain)
    # protrusions start inside the shell so they stay attached to it
    nose = _box(x, y, z, (-6, 6), (outer - 1, outer + 10), (-20, -6)) & ~shell if spec.with_nose else empty
    occiput = _box(x, y, z, (-8, 8), (-outer - 10, -outer + 1), (-14, 0)) & ~shell if spec.with_occiput else empty
    data = np.zeros(brain.shape)
    data[brain] = spec.brain_value
    data[shell | nose | occiput] = spec.shell_value
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        data = data + rng.normal(0, spec.noise_sigma, data.shape)
    vol = Volume(data, centered_affine(spec.size, spec.spacing_mm))
    return HeadPhantom(vol, brain, shell, nose, occiput)


def sphere_phantom(size: int = 64, spacing: float = 2.0, radius_mm: float = 40.0,
                   value: float = 100.0) -> tuple[Volume, np.ndarray]:
    x, y, z = world_grid(size, spacing)
    mask = x ** 2 + y ** 2 + z ** 2 <= radius_mm ** 2
    return Volume(np.where(mask, value, 0.0), centered_affine(size, spacing)), mask


def labeled_phantom(shape=(7, 9, 11), seed: int = 0) -> Volume:
    """Small RAS volume whose voxel values are all distinct (for reorientation checks)."""
    rng = np.random.default_rng(seed)
    data = rng.permutation(int(np.prod(shape))).reshape(shape).astype(np.float64)
    A = np.diag([1.5, 2.0, 2.5, 1.0])
    A[:3, 3] = (-10.0, 20.0, 5.0)
    return Volume(data, A)
