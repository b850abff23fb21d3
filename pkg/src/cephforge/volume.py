"""Volume ingestion, rigid resampling, and skeleton/airway enhancement.

A volume is a 3-D scalar grid in Hounsfield units.  ``data[ix, iy, iz]`` is
the voxel whose center sits at ``origin + spacing * (ix, iy, iz)`` in world
millimeters.  Volumes are immutable: construction normalizes the payload to
read-only float64 and every operation returns a new instance.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from ._interp import sample_trilinear

HU_FLOOR = -1024.0
AIR_HU = -1000.0

# Output slab size for the resampler; bounds the temporary coordinate grids.
_RESAMPLE_SLAB = 8 * 1024 * 1024


@dataclass(frozen=True)
class Volume:
    """3-D HU grid with voxel spacing (mm) and world origin (mm)."""

    data: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError("volume data must be a non-empty 3-D array")
        if not np.all(np.isfinite(data)):
            raise ValueError("volume data must be finite")
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be 3 positive values, got {spacing}")
        if len(origin) != 3:
            raise ValueError("origin must have 3 components")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @classmethod
    def centered(cls, data: np.ndarray, spacing) -> "Volume":
        """Volume whose world center (isocenter) is (0, 0, 0)."""
        data = np.asarray(data)
        spacing = tuple(float(s) for s in np.broadcast_to(spacing, 3))
        origin = tuple(-(n - 1) / 2.0 * s for n, s in zip(data.shape, spacing))
        return cls(data, spacing, origin)

    def world_extent(self) -> tuple[tuple[float, float], ...]:
        """Closed world range spanned by voxel centers, per axis."""
        return tuple(
            (o, o + (n - 1) * s)
            for o, s, n in zip(self.origin, self.spacing, self.dims)
        )


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) map p -> rotation @ p + translation, in world mm."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9):
            raise ValueError("rotation must be orthonormal (tolerance 1e-9)")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must be proper (det +1)")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def translate(cls, t) -> "RigidTransform":
        return cls(np.eye(3), np.asarray(t, dtype=np.float64))

    @classmethod
    def rotate_z(cls, angle_deg: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        a = np.deg2rad(angle_deg)
        c, s = np.cos(a), np.sin(a)
        r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls(r, np.asarray(translation, dtype=np.float64))


@dataclass(frozen=True)
class EnhanceParams:
    """Thresholds and bone weight for the skeleton/airway enhancement map."""

    bone_threshold: float = 1000.0
    air_threshold: float = -500.0
    bone_weight: float = 1.3

    def __post_init__(self):
        if not self.air_threshold < self.bone_threshold:
            raise ValueError("air_threshold must be below bone_threshold")
        if not self.bone_weight > 0:
            raise ValueError("bone_weight must be positive")


def _resolve_sidecar(path: Path) -> Path:
    if path.suffix != ".meta":
        candidate = path.with_suffix(".meta")
        if candidate.exists():
            return candidate
    return path


def load_volume(path) -> Volume:
    """Load a volume from its sidecar metadata + raw int16 payload.

    Values below -1024 HU are clamped to -1024 at load time.
    """
    meta_path = _resolve_sidecar(Path(path))
    if not meta_path.exists():
        raise FileNotFoundError(str(meta_path))
    meta = fileio.read_keyvalues(meta_path)
    for key in ("dims", "spacing_mm", "dtype"):
        if key not in meta:
            raise ValueError(f"{meta_path}: missing required key {key!r}")
    dims = fileio.parse_ints(meta["dims"], 3, "dims")
    spacing = fileio.parse_floats(meta["spacing_mm"], 3, "spacing_mm")
    origin = fileio.parse_floats(meta.get("origin_mm", "0,0,0"), 3, "origin_mm")
    if any(s <= 0 for s in spacing):
        raise ValueError(f"{meta_path}: non-positive spacing {spacing}")
    if meta["dtype"] != "int16le":
        raise ValueError(f"{meta_path}: unsupported dtype {meta['dtype']!r}")

    payload = meta_path.parent / meta.get("data", meta_path.stem + ".raw")
    if not payload.exists():
        raise FileNotFoundError(str(payload))
    nx, ny, nz = dims
    raw = np.fromfile(payload, dtype="<i2")
    if raw.size != nx * ny * nz:
        raise ValueError(
            f"{payload}: payload holds {raw.size} scalars, metadata declares "
            f"{nx}x{ny}x{nz} = {nx * ny * nz}"
        )
    # payload order: X fastest, then Y, then Z
    data = raw.reshape(nz, ny, nx).transpose(2, 1, 0).astype(np.float64)
    np.maximum(data, HU_FLOOR, out=data)
    return Volume(data, spacing, origin)


def save_volume(v: Volume, path) -> Path:
    """Write sidecar + raw int16 payload; returns the sidecar path."""
    meta_path = Path(path)
    if meta_path.suffix != ".meta":
        meta_path = meta_path.with_suffix(".meta")
    payload = meta_path.with_suffix(".raw")
    nx, ny, nz = v.dims
    fileio.write_keyvalues(
        meta_path,
        {
            "dims": f"{nx},{ny},{nz}",
            "spacing_mm": "{:.9g},{:.9g},{:.9g}".format(*v.spacing),
            "origin_mm": "{:.9g},{:.9g},{:.9g}".format(*v.origin),
            "dtype": "int16le",
            "data": payload.name,
        },
    )
    scalars = np.clip(np.rint(v.data), -32768, 32767).astype("<i2")
    scalars.transpose(2, 1, 0).tofile(payload)
    return meta_path


def resample_rigid(v: Volume, t: RigidTransform, method: str = "trilinear") -> Volume:
    """Resample ``v`` through rigid transform ``t`` onto the same grid.

    Output voxel at world p is sampled from the input at t^-1(p); samples
    falling outside the input grid are filled with -1000 HU (air).

    Parameters
    ----------
    method : "trilinear" (default) or "nearest".
    """
    if method not in ("trilinear", "nearest"):
        raise ValueError(f"unknown method {method!r}")
    nx, ny, nz = v.dims
    s = np.asarray(v.spacing)
    o = np.asarray(v.origin)
    rt = t.rotation.T
    # index-space affine: input_index = A @ output_index + b
    a = (rt * s[np.newaxis, :]) / s[:, np.newaxis]
    b = (rt @ (o - t.translation) - o) / s

    iy = np.arange(ny, dtype=np.float64)
    iz = np.arange(nz, dtype=np.float64)
    out = np.empty(v.dims, dtype=np.float64)
    slab = max(1, _RESAMPLE_SLAB // (8 * 4 * ny * nz))
    for x0 in range(0, nx, slab):
        ix = np.arange(x0, min(x0 + slab, nx), dtype=np.float64)
        gx = ix[:, None, None]
        gy = iy[None, :, None]
        gz = iz[None, None, :]
        jx = a[0, 0] * gx + a[0, 1] * gy + a[0, 2] * gz + b[0]
        jy = a[1, 0] * gx + a[1, 1] * gy + a[1, 2] * gz + b[1]
        jz = a[2, 0] * gx + a[2, 1] * gy + a[2, 2] * gz + b[2]
        if method == "nearest":
            jx, jy, jz = np.rint(jx), np.rint(jy), np.rint(jz)
        out[x0 : x0 + len(ix)] = sample_trilinear(v.data, jx, jy, jz, fill=AIR_HU)
    return Volume(out, v.spacing, v.origin)


def enhance_skeleton(v: Volume, p: EnhanceParams = EnhanceParams()) -> Volume:
    """Voxelwise enhancement: boost bone, flatten air.

    value > bone_threshold -> value * bone_weight; value < air_threshold ->
    -1000 HU; otherwise unchanged.  Intentionally applied exactly once in the
    synthesis pipeline: re-application rescales already-boosted bone.
    """
    d = v.data
    out = np.where(d > p.bone_threshold, d * p.bone_weight,
                   np.where(d < p.air_threshold, AIR_HU, d))
    return Volume(out, v.spacing, v.origin)
