"""Synthetic HU phantoms for tests and demos."""

from __future__ import annotations

import numpy as np

from .volume import AIR_HU, Volume


def uniform_volume(dims, spacing, hu: float = 0.0) -> Volume:
    """Centered volume of constant HU."""
    return Volume.centered(np.full(dims, float(hu)), spacing)


def box_volume(dims, spacing, hu_inside: float, lo_mm, hi_mm, hu_outside: float = AIR_HU) -> Volume:
    """Centered volume holding an axis-aligned box of ``hu_inside``.

    ``lo_mm``/``hi_mm`` bound the box by voxel-center world coordinates.
    """
    data = np.full(dims, float(hu_outside))
    v = Volume.centered(data, spacing)
    coords = [o + np.arange(n) * s for o, s, n in zip(v.origin, v.spacing, dims)]
    masks = [(c >= lo) & (c <= hi) for c, lo, hi in zip(coords, lo_mm, hi_mm)]
    inside = masks[0][:, None, None] & masks[1][None, :, None] & masks[2][None, None, :]
    data = np.where(inside, float(hu_inside), float(hu_outside))
    return Volume.centered(data, spacing)


def point_volume(dims, spacing, point_index, hu: float = 2000.0) -> Volume:
    """Air volume with a single hot voxel at ``point_index``."""
    data = np.full(dims, AIR_HU)
    data[tuple(point_index)] = float(hu)
    return Volume.centered(data, spacing)


def head_phantom(n: int = 96, spacing: float = 2.0) -> Volume:
    """Smooth head-ish phantom: soft-tissue ellipsoid, bone shell, airway.

    Spans roughly a head at the default 2 mm voxels; values are standard
    HU (air -1000, soft tissue ~40, bone ~1200).
    """
    v = Volume.centered(np.zeros((n, n, n)), spacing)
    half = np.array([(d - 1) / 2.0 * s for d, s in zip((n, n, n), v.spacing)])
    x = (np.arange(n) * spacing + v.origin[0])[:, None, None]
    y = (np.arange(n) * spacing + v.origin[1])[None, :, None]
    z = (np.arange(n) * spacing + v.origin[2])[None, None, :]

    def ellipsoid(rx, ry, rz, cx=0.0, cy=0.0, cz=0.0):
        return ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 + ((z - cz) / rz) ** 2

    rx, ry, rz = 0.80 * half
    head = ellipsoid(rx, ry, rz)
    skull = ellipsoid(0.92 * rx, 0.92 * ry, 0.92 * rz)
    brain = ellipsoid(0.80 * rx, 0.80 * ry, 0.80 * rz)
    airway = ellipsoid(0.10 * rx, 0.10 * ry, 0.45 * rz, cz=-0.3 * rz)

    data = np.full((n, n, n), AIR_HU)
    data = np.where(head <= 1.0, 40.0, data)
    data = np.where((skull <= 1.0) & (brain > 1.0), 1200.0, data)
    data = np.where(brain <= 1.0, 30.0, data)
    data = np.where(airway <= 1.0, -950.0, data)
    return Volume.centered(data, spacing)
