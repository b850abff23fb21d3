"""Forward projection of HU volumes to attenuation line-integral images.

Geometry conventions used across the package:

* World axes: X is the patient left-right (projection) axis, Y in-plane
  horizontal, Z vertical.  The isocenter is the world origin.
* Detector/image arrays are indexed ``[u, v]``; u runs along +y and v along
  +z for the 0-degree view.  Pixel (u, v) centers sit at
  ``plane_origin + spacing * (u, v)``; grids are centered on the axis.
* The 0-degree source sits at (+d0, 0, 0) and its detector plane at
  x = d0 - d1; the 180-degree view mirrors both through the isocenter and
  its raw detector u axis runs along -y (the views face each other).

Integrals sample at a fixed rate along each ray (default 3 samples/mm) with
trilinear interpolation and midpoint step weighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from ._interp import SNAP_EPS, sample_trilinear
from .volume import AIR_HU, Volume

DEFAULT_SAMPLES_PER_MM = 3.0
SUSPICIOUS_INTEGRAL = 20.0

# top-K sample buffer budget for MIP, in float64 elements
_MIP_BLOCK_ELEMS = 32 * 1024 * 1024


@dataclass(frozen=True)
class DetectorGrid:
    """Pixel grid of a (real or virtual) detector, centered on the axis."""

    nu: int
    nv: int
    su: float
    sv: float

    def __post_init__(self):
        if self.nu < 1 or self.nv < 1:
            raise ValueError("degenerate detector grid: dims must be >= 1")
        if self.su <= 0 or self.sv <= 0:
            raise ValueError("degenerate detector grid: spacing must be positive")

    @property
    def plane_origin(self) -> tuple[float, float]:
        return (-(self.nu - 1) / 2.0 * self.su, -(self.nv - 1) / 2.0 * self.sv)

    def u_coords(self) -> np.ndarray:
        return (np.arange(self.nu) - (self.nu - 1) / 2.0) * self.su

    def v_coords(self) -> np.ndarray:
        return (np.arange(self.nv) - (self.nv - 1) / 2.0) * self.sv


@dataclass(frozen=True)
class IntegralImage:
    """2-D line-integral image (dimensionless) on a detector grid.

    Ray-cast attenuation integrals are non-negative with a typical head range
    of about [0, 8]; ``diagnostics`` flags values above 20 as suspicious.
    MIP panels reuse this container with HU-valued pixels.
    """

    data: np.ndarray
    spacing: tuple[float, float]
    plane_origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("integral image must be 2-D")
        if not np.all(np.isfinite(data)):
            raise ValueError("integral image values must be finite")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 2 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be 2 positive values, got {spacing}")
        origin = tuple(float(o) for o in self.plane_origin)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "plane_origin", origin)

    @property
    def dims(self) -> tuple[int, int]:
        return self.data.shape

    def diagnostics(self) -> dict:
        d = self.data
        return {
            "min": float(d.min()),
            "max": float(d.max()),
            "mean": float(d.mean()),
            "negative": bool((d < 0).any()),
            "suspicious": bool((d > SUSPICIOUS_INTEGRAL).any()),
        }


@dataclass(frozen=True)
class ConeGeometry:
    """Cone-beam view: source-isocenter d0, source-detector d1 (mm)."""

    d0: float
    d1: float
    detector: DetectorGrid
    angle_deg: float = 0.0

    def __post_init__(self):
        if not 0 < self.d0 < self.d1:
            raise ValueError(
                f"require 0 < d0 < d1, got d0={self.d0}, d1={self.d1}"
            )
        if self.angle_deg not in (0.0, 180.0, 0, 180):
            raise ValueError("angle_deg must be 0 or 180")

    @property
    def source(self) -> tuple[float, float, float]:
        sign = 1.0 if self.angle_deg == 0 else -1.0
        return (sign * self.d0, 0.0, 0.0)

    def with_angle(self, angle_deg: float) -> "ConeGeometry":
        return ConeGeometry(self.d0, self.d1, self.detector, angle_deg)


@dataclass(frozen=True)
class AttenuationModel:
    """Linear HU -> attenuation map, mu in 1/mm."""

    mu_water: float = 0.0203

    def __post_init__(self):
        if not self.mu_water > 0:
            raise ValueError("mu_water must be positive")


WEHMER_D0 = 1524.0
WEHMER_D1 = 1639.0
CBCT_D0 = 650.0
CBCT_D1 = 950.0


def resolve_distances(a: float, b: float, allow_swapped: bool = True) -> tuple[float, float]:
    """Normalize a (d0, d1) pair; optionally accept the swapped ordering."""
    if 0 < a < b:
        return float(a), float(b)
    if allow_swapped and 0 < b < a:
        return float(b), float(a)
    raise ValueError(f"invalid source distances ({a}, {b}); require 0 < d0 < d1")


def wehmer_geometry(detector: DetectorGrid | None = None, angle_deg: float = 0.0) -> ConeGeometry:
    """Standard cephalostat: source-isocenter 1524 mm, isocenter-film 115 mm."""
    det = detector or DetectorGrid(512, 512, 0.5, 0.5)
    return ConeGeometry(WEHMER_D0, WEHMER_D1, det, angle_deg)


def dental_cbct_geometry(detector: DetectorGrid | None = None, angle_deg: float = 0.0) -> ConeGeometry:
    """Dental CBCT acquisition: d0 = 650 mm, d1 = 950 mm, 0.73 mm pixels."""
    det = detector or DetectorGrid(512, 512, 0.73, 0.73)
    return ConeGeometry(CBCT_D0, CBCT_D1, det, angle_deg)


def hu_to_mu(hu, m: AttenuationModel = AttenuationModel()):
    """mu = mu_water * (1 + hu/1000), clamped below at zero."""
    hu = np.asarray(hu, dtype=np.float64)
    mu = m.mu_water * (1.0 + hu / 1000.0)
    return np.maximum(mu, 0.0)


def _x_samples(v: Volume, samples_per_mm: float, pad_voxels: float = 1.0) -> np.ndarray:
    """Midpoint sample positions along X across the volume's voxel centers.

    Integrals pad by one voxel so the half-voxel boundary ramps contribute;
    MIP passes pad_voxels=0 and rounds down so every sample interpolates
    interior voxels only (order statistics must not see edge taper).
    """
    (x_lo, x_hi) = v.world_extent()[0]
    x_lo -= pad_voxels * v.spacing[0]
    x_hi += pad_voxels * v.spacing[0]
    span = (x_hi - x_lo) * samples_per_mm
    n = max(1, math.ceil(span) if pad_voxels > 0 else math.floor(span))
    step = 1.0 / samples_per_mm
    return x_lo + (np.arange(n) + 0.5) * step


class _SliceSampler:
    """Resamples field X-slices onto a fixed detector (y, z) grid.

    Bilinear in (y, z) with out-of-range fill; slices are cached so marching
    along X costs one fresh slice resample per voxel plane.
    """

    def __init__(self, data: np.ndarray, origin, spacing, det: DetectorGrid, fill: float):
        self.data = data
        self.fill = fill
        self.nx = data.shape[0]
        ny, nz = data.shape[1], data.shape[2]
        self.origin_x, self.spacing_x = origin[0], spacing[0]

        def axis(coords_mm, o, s, n):
            c = (coords_mm - o) / s
            r = np.rint(c)
            c = np.where(np.abs(c - r) <= SNAP_EPS, r, c)
            inside = (c >= 0.0) & (c <= n - 1)
            c = np.where(inside, c, 0.0)
            i0 = np.clip(np.floor(c).astype(np.intp), 0, max(n - 2, 0))
            i1 = np.minimum(i0 + 1, n - 1)
            return i0, i1, c - i0, inside

        self.y0, self.y1, self.fy, in_y = axis(det.u_coords(), origin[1], spacing[1], ny)
        self.z0, self.z1, self.fz, in_z = axis(det.v_coords(), origin[2], spacing[2], nz)
        self.mask = in_y[:, None] & in_z[None, :]
        self._cache: dict[int, np.ndarray] = {}

    def plane(self, i: int) -> np.ndarray:
        got = self._cache.get(i)
        if got is not None:
            return got
        s = self.data[i]
        gy = (1.0 - self.fy)[:, None]
        sy = s[self.y0, :] * gy + s[self.y1, :] * self.fy[:, None]
        gz = (1.0 - self.fz)[None, :]
        p = sy[:, self.z0] * gz + sy[:, self.z1] * self.fz[None, :]
        p = np.where(self.mask, p, self.fill)
        if len(self._cache) > 2:
            self._cache.clear()
        self._cache[i] = p
        return p

    def sample_at_x(self, x_mm: float) -> np.ndarray | None:
        """Detector-grid plane at world x (lerp of two slices); None if past
        the field's x support."""
        c = (x_mm - self.origin_x) / self.spacing_x
        r = round(c)
        if abs(c - r) <= SNAP_EPS:
            c = float(r)
        if c < 0.0 or c > self.nx - 1:
            return None
        i0 = min(max(int(math.floor(c)), 0), max(self.nx - 2, 0))
        f = c - i0
        if f == 0.0:
            return self.plane(i0)
        return (1.0 - f) * self.plane(i0) + f * self.plane(min(i0 + 1, self.nx - 1))


def _integration_field(v: Volume, m: AttenuationModel | None) -> tuple[np.ndarray, np.ndarray]:
    """Attenuation field padded with one zero voxel per side.

    The zero ring gives the trilinear reconstruction a half-voxel linear
    taper at the volume boundary, so a slab of n voxels carries exactly
    n * spacing * mu of integral mass (its physical thickness).
    Returns (field, padded_origin).
    """
    base = hu_to_mu(v.data, m) if m is not None else np.asarray(v.data, dtype=np.float64)
    field = np.pad(base, 1, mode="constant", constant_values=0.0)
    origin = np.asarray(v.origin) - np.asarray(v.spacing)
    return np.ascontiguousarray(field), origin


def project_orthogonal(
    v: Volume,
    detector: DetectorGrid,
    m: AttenuationModel | None = AttenuationModel(),
    samples_per_mm: float = DEFAULT_SAMPLES_PER_MM,
) -> IntegralImage:
    """Line integrals along X-parallel rays through each pixel center.

    Pass ``m=None`` to integrate the stored voxel values directly (useful
    for phantoms already expressed in attenuation units).
    """
    field, origin = _integration_field(v, m)
    sampler = _SliceSampler(field, origin, v.spacing, detector, fill=0.0)
    acc = np.zeros((detector.nu, detector.nv))
    for x in _x_samples(v, samples_per_mm):
        p = sampler.sample_at_x(x)
        if p is not None:
            acc += p
    acc /= samples_per_mm
    return IntegralImage(acc, (detector.su, detector.sv), detector.plane_origin)


def project_mip(
    v: Volume,
    k: int,
    detector: DetectorGrid,
    samples_per_mm: float = DEFAULT_SAMPLES_PER_MM,
) -> IntegralImage:
    """Mean of the k largest HU samples along each X-parallel ray.

    Samples off the grid count as air (-1000 HU); rays with fewer than k
    samples average all of them.  Output pixels are HU-valued.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    sampler = _SliceSampler(
        np.asarray(v.data, dtype=np.float64), v.origin, v.spacing, detector, fill=AIR_HU
    )
    xs = _x_samples(v, samples_per_mm, pad_voxels=0.0)
    nu, nv = detector.nu, detector.nv
    n_samples = len(xs)
    kk = min(k, n_samples)

    out = np.empty((nu, nv))
    block = max(1, _MIP_BLOCK_ELEMS // (nv * n_samples))
    for u0 in range(0, nu, block):
        u1 = min(u0 + block, nu)
        buf = np.empty((u1 - u0, nv, n_samples))
        for j, x in enumerate(xs):
            p = sampler.sample_at_x(x)
            buf[:, :, j] = AIR_HU if p is None else p[u0:u1]
        if kk < n_samples:
            top = np.partition(buf, n_samples - kk, axis=2)[:, :, n_samples - kk :]
        else:
            top = buf
        out[u0:u1] = top.mean(axis=2)
    return IntegralImage(out, (detector.su, detector.sv), detector.plane_origin)


def project_perspective(
    v: Volume,
    g: ConeGeometry,
    m: AttenuationModel | None = AttenuationModel(),
    samples_per_mm: float = DEFAULT_SAMPLES_PER_MM,
) -> IntegralImage:
    """Cone-beam line integrals from the view's source to each pixel center.

    Rays missing the volume yield 0.  The returned image is in the view's raw
    detector frame (u along -y for the 180-degree view).
    """
    field, f_origin = _integration_field(v, m)
    det = g.detector
    sign = 1.0 if g.angle_deg == 0 else -1.0
    src = np.array([sign * g.d0, 0.0, 0.0])
    plane_x = sign * (g.d0 - g.d1)

    uu = sign * det.u_coords()  # world y of each pixel column
    vv = det.v_coords()
    px = np.full((det.nu, det.nv), plane_x)
    py = np.broadcast_to(uu[:, None], (det.nu, det.nv))
    pz = np.broadcast_to(vv[None, :], (det.nu, det.nv))

    dx, dy, dz = px - src[0], py - src[1], pz - src[2]
    length = np.sqrt(dx * dx + dy * dy + dz * dz)
    ux, uy, uz = dx / length, dy / length, dz / length

    # ray intersection with the padded field's support, per axis
    t_lo = np.zeros_like(length)
    t_hi = length.copy()
    spacing = np.asarray(v.spacing)
    lo_w = f_origin
    hi_w = f_origin + (np.asarray(field.shape) - 1) * spacing
    for axis, u_ax in enumerate((ux, uy, uz)):
        s_ax = src[axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo_w[axis] - s_ax) / u_ax
            t2 = (hi_w[axis] - s_ax) / u_ax
        near = np.minimum(t1, t2)
        far = np.maximum(t1, t2)
        parallel = u_ax == 0.0
        inside = (s_ax >= lo_w[axis]) & (s_ax <= hi_w[axis])
        near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
        far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
        t_lo = np.maximum(t_lo, near)
        t_hi = np.minimum(t_hi, far)

    span = np.maximum(t_hi - t_lo, 0.0)
    n_steps = np.ceil(span * samples_per_mm).astype(np.intp)
    step = 1.0 / samples_per_mm

    acc = np.zeros_like(length)
    inv_s = 1.0 / spacing
    for kstep in range(int(n_steps.max()) if n_steps.size else 0):
        active = kstep < n_steps
        t = t_lo + (kstep + 0.5) * step
        ix = (src[0] + ux * t - f_origin[0]) * inv_s[0]
        iy = (src[1] + uy * t - f_origin[1]) * inv_s[1]
        iz = (src[2] + uz * t - f_origin[2]) * inv_s[2]
        val = sample_trilinear(field, ix, iy, iz, fill=0.0)
        acc += np.where(active, val, 0.0)
    acc *= step
    return IntegralImage(acc, (det.su, det.sv), det.plane_origin)


def save_integral_image(img: IntegralImage, path) -> Path:
    """Write sidecar + raw float32 little-endian raster (u fastest, then v)."""
    meta_path = Path(path)
    if meta_path.suffix != ".meta":
        meta_path = meta_path.with_suffix(".meta")
    payload = meta_path.with_suffix(".raw")
    nu, nv = img.dims
    fileio.write_keyvalues(
        meta_path,
        {
            "dims": f"{nu},{nv}",
            "spacing_mm": "{:.9g},{:.9g}".format(*img.spacing),
            "plane_origin_mm": "{:.9g},{:.9g}".format(*img.plane_origin),
            "dtype": "float32le",
            "data": payload.name,
        },
    )
    img.data.T.astype("<f4").tofile(payload)
    return meta_path


def load_integral_image(path) -> IntegralImage:
    meta_path = Path(path)
    if meta_path.suffix != ".meta":
        candidate = meta_path.with_suffix(".meta")
        if candidate.exists():
            meta_path = candidate
    if not meta_path.exists():
        raise FileNotFoundError(str(meta_path))
    meta = fileio.read_keyvalues(meta_path)
    nu, nv = fileio.parse_ints(meta["dims"], 2, "dims")
    spacing = fileio.parse_floats(meta["spacing_mm"], 2, "spacing_mm")
    origin = fileio.parse_floats(meta.get("plane_origin_mm", "0,0"), 2, "plane_origin_mm")
    if meta.get("dtype", "float32le") != "float32le":
        raise ValueError(f"{meta_path}: unsupported dtype {meta['dtype']!r}")
    payload = meta_path.parent / meta.get("data", meta_path.stem + ".raw")
    raw = np.fromfile(payload, dtype="<f4")
    if raw.size != nu * nv:
        raise ValueError(f"{payload}: payload size {raw.size} != {nu}x{nv}")
    return IntegralImage(raw.reshape(nv, nu).T.astype(np.float64), spacing, origin)
