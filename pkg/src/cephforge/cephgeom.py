"""Cone-beam rebinning geometry, quadrant symmetry, and dual-view packing.

The virtual detector (VD) is the x = 0 midsagittal plane sampled on a
centered grid.  Rebinning the physical projections onto it removes the
perspective magnification for midsagittal structures, which is what lets
the 0-degree and 180-degree views be fused per quadrant.

All 2-D arrays here follow the package (u, v) convention: u along +y,
v along +z, grids centered on the axis (see projector module).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._interp import sample_bilinear
from .projector import ConeGeometry, DetectorGrid, IntegralImage


@dataclass(frozen=True)
class VirtualDetectorSpec:
    """VD pixel grid; dims must be even so the quadrant split is exact."""

    dims: tuple[int, int] = (512, 512)
    spacing: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        if len(dims) != 2 or any(n < 2 or n % 2 for n in dims):
            raise ValueError(f"VD dims must be even and >= 2, got {dims}")
        if len(spacing) != 2 or any(s <= 0 for s in spacing):
            raise ValueError(f"VD spacing must be positive, got {spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)

    @property
    def grid(self) -> DetectorGrid:
        return DetectorGrid(self.dims[0], self.dims[1], *self.spacing)


class Quadrant(Enum):
    """Detector-plane quadrants: Q1 = (y>=0, z>=0), numbered counterclockwise."""

    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    Q4 = "Q4"


# flips that map each quadrant onto Q1's orientation: (flip_u, flip_v)
_QUADRANT_FLIPS = {
    Quadrant.Q1: (False, False),
    Quadrant.Q2: (True, False),
    Quadrant.Q3: (True, True),
    Quadrant.Q4: (False, True),
}


@dataclass(frozen=True)
class QuadrantPatch:
    data: np.ndarray
    quadrant: Quadrant
    normalized: bool = False

    def __post_init__(self):
        data = np.ascontiguousarray(self.data)
        if data.ndim != 2:
            raise ValueError("quadrant patch must be 2-D")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if not isinstance(self.quadrant, Quadrant):
            object.__setattr__(self, "quadrant", Quadrant(self.quadrant))


@dataclass(frozen=True)
class DualRgbPatch:
    """RGB fusion of normalized 0/180-degree patches: r = b = 0-degree,
    g = 180-degree; gray pixels mark agreement between the views."""

    r: np.ndarray
    g: np.ndarray
    b: np.ndarray
    quadrant: Quadrant | None = None

    def __post_init__(self):
        for name, ch in (("r", self.r), ("g", self.g), ("b", self.b)):
            if ch.ndim != 2 or ch.dtype != np.uint8:
                raise ValueError(f"channel {name} must be a 2-D uint8 array")
        if not (self.r.shape == self.g.shape == self.b.shape):
            raise ValueError("channel dims must match")
        if not np.array_equal(self.r, self.b):
            raise ValueError("r and b must carry the identical 0-degree patch")

    def to_array(self) -> np.ndarray:
        return np.stack([self.r, self.g, self.b], axis=2)


@dataclass(frozen=True)
class PatchEnvelope:
    """Convex union footprint of a projected volume patch on the VD.

    Square (4 vertices) when the patch corner sits at the origin or the
    depth range is degenerate; hexagon (6) in generic position.  (A corner
    on one axis yields the intermediate 5-vertex polygon.)
    """

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(y), float(z)) for y, z in self.vertices)
        if len(verts) < 3:
            raise ValueError("envelope needs at least 3 vertices")
        pts = np.asarray(verts)
        a = np.roll(pts, -1, axis=0) - pts
        b = np.roll(pts, -2, axis=0) - np.roll(pts, -1, axis=0)
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        if (cross <= 0).any():
            raise ValueError("envelope must be convex, simple, and CCW")
        object.__setattr__(self, "vertices", verts)

    def contains(self, y: float, z: float, tol: float = 1e-9) -> bool:
        pts = np.asarray(self.vertices)
        edge = np.roll(pts, -1, axis=0) - pts
        rel = np.array([y, z])[None, :] - pts
        cross = edge[:, 0] * rel[:, 1] - edge[:, 1] * rel[:, 0]
        return bool((cross >= -tol).all())


def magnification(x: float, d0: float) -> float:
    """Perspective magnification on the VD for a structure at depth x.

    x is measured from the VD plane toward the source; x = 0 is the
    midsagittal plane (no magnification).
    """
    if x >= d0:
        raise ValueError(f"depth x = {x} must be strictly below d0 = {d0}")
    return d0 / (d0 - x)


def flip_horizontal(img: IntegralImage) -> IntegralImage:
    """Mirror a centered projection about the vertical axis (y -> -y).

    Applied to 180-degree projections right after simulation so downstream
    code works entirely in the 0-degree frame.
    """
    return IntegralImage(img.data[::-1, :], img.spacing, img.plane_origin)


def rebin_to_vd(proj: IntegralImage, g: ConeGeometry, vd: VirtualDetectorSpec) -> IntegralImage:
    """Rebin a physical-detector projection onto the virtual detector.

    VD pixel (y, z) takes the bilinear sample of the projection at
    (y * d1/d0, z * d1/d0); samples beyond the detector are 0.  ``proj``
    must be in the 0-degree-aligned frame (flip 180-degree views first).
    """
    det = g.detector
    if proj.dims != (det.nu, det.nv):
        raise ValueError(
            f"projection dims {proj.dims} do not match geometry detector "
            f"({det.nu}, {det.nv})"
        )
    scale = g.d1 / g.d0
    grid = vd.grid
    yq = grid.u_coords() * scale
    zq = grid.v_coords() * scale
    iu = (yq - proj.plane_origin[0]) / proj.spacing[0]
    iv = (zq - proj.plane_origin[1]) / proj.spacing[1]
    out = sample_bilinear(proj.data, iu[:, None], iv[None, :], fill=0.0)
    return IntegralImage(out, vd.spacing, grid.plane_origin)


def cone_project_point(pt, g: ConeGeometry) -> tuple[float, float]:
    """Perspective projection of a world point onto the VD plane (x = 0).

    The 180-degree result is reported in the 0-degree-aligned frame, so both
    views return plain world (y, z) coordinates.  The point must lie strictly
    between the view's source and detector planes.
    """
    x, y, z = (float(c) for c in pt)
    sign = 1.0 if g.angle_deg == 0 else -1.0
    source_x = sign * g.d0
    plane_x = sign * (g.d0 - g.d1)
    lo, hi = min(source_x, plane_x), max(source_x, plane_x)
    if not lo < x < hi:
        raise ValueError(
            f"point x = {x} must lie strictly between source ({source_x}) "
            f"and detector plane ({plane_x})"
        )
    t = source_x / (source_x - x)
    return (t * y, t * z)


def _convex_hull(points: np.ndarray) -> list[tuple[float, float]]:
    """Monotone-chain hull, CCW, collinear points dropped."""
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) <= 2:
        return pts

    def build(seq):
        chain: list[tuple[float, float]] = []
        for p in seq:
            while len(chain) >= 2:
                (ox, oy), (ax, ay) = chain[-2], chain[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = build(pts)
    upper = build(reversed(pts))
    return lower[:-1] + upper[:-1]


def patch_envelope(
    y0: float, z0: float, L0: float, x_min: float, x_max: float, d0: float
) -> PatchEnvelope:
    """Union footprint of the projections of a square volume patch.

    The patch has lower-left corner (y0, z0) and edge L0 in its own plane;
    across depths x in [x_min, x_max] it projects to squares with corner
    (m*y0, m*z0) and edge m*L0.  The union over the depth range is the
    convex hull of the two extreme squares.
    """
    if y0 < 0 or z0 < 0:
        raise ValueError("patch corner must satisfy y0, z0 >= 0")
    if L0 <= 0:
        raise ValueError("edge length L0 must be positive")
    if not x_min <= x_max:
        raise ValueError("require x_min <= x_max")
    m_lo = magnification(x_min, d0)
    m_hi = magnification(x_max, d0)
    corners = []
    for m in (m_lo, m_hi):
        for cy in (y0, y0 + L0):
            for cz in (z0, z0 + L0):
                corners.append((m * cy, m * cz))
    return PatchEnvelope(tuple(_convex_hull(np.asarray(corners))))


def split_quadrants(img) -> tuple[QuadrantPatch, QuadrantPatch, QuadrantPatch, QuadrantPatch]:
    """Split a centered even-dim image into its four quadrant patches.

    Returns (Q1, Q2, Q3, Q4).  Pixel centers never sit on the split axes
    because dims are even, so the partition is exact.
    """
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array")
    nu, nv = arr.shape
    if nu % 2 or nv % 2:
        raise ValueError(f"quadrant split needs even dims, got {arr.shape}")
    cu, cv = nu // 2, nv // 2
    return (
        QuadrantPatch(arr[cu:, cv:], Quadrant.Q1),
        QuadrantPatch(arr[:cu, cv:], Quadrant.Q2),
        QuadrantPatch(arr[:cu, :cv], Quadrant.Q3),
        QuadrantPatch(arr[cu:, :cv], Quadrant.Q4),
    )


def _flipped(data: np.ndarray, quadrant: Quadrant) -> np.ndarray:
    flip_u, flip_v = _QUADRANT_FLIPS[quadrant]
    out = data
    if flip_u:
        out = out[::-1, :]
    if flip_v:
        out = out[:, ::-1]
    return out.copy()


def normalize_quadrant(p: QuadrantPatch) -> QuadrantPatch:
    """Flip a raw quadrant patch into Q1's orientation (Q2: horizontal,
    Q3: horizontal+vertical, Q4: vertical)."""
    if p.normalized:
        raise ValueError(f"{p.quadrant.value} patch is already normalized")
    return QuadrantPatch(_flipped(p.data, p.quadrant), p.quadrant, normalized=True)


def denormalize_quadrant(p: QuadrantPatch) -> QuadrantPatch:
    """Inverse of normalize_quadrant (the flips are involutions)."""
    if not p.normalized:
        raise ValueError(f"{p.quadrant.value} patch is not normalized")
    return QuadrantPatch(_flipped(p.data, p.quadrant), p.quadrant, normalized=False)


def pack_dual(p0: QuadrantPatch, p180: QuadrantPatch) -> DualRgbPatch:
    """Fuse normalized, quantized 0/180-degree patches of one quadrant into
    an RGB patch (r = b = 0 degrees, g = 180 degrees)."""
    if not (p0.normalized and p180.normalized):
        raise ValueError("both patches must be normalized before packing")
    if p0.quadrant != p180.quadrant:
        raise ValueError(f"quadrant mismatch: {p0.quadrant} vs {p180.quadrant}")
    if p0.data.shape != p180.data.shape:
        raise ValueError("patch dims must match")
    if p0.data.dtype != np.uint8 or p180.data.dtype != np.uint8:
        raise ValueError("patches must be quantized to uint8 before packing")
    return DualRgbPatch(r=p0.data, g=p180.data, b=p0.data, quadrant=p0.quadrant)


def stitch_quadrants(patches, denormalize: bool = False) -> np.ndarray:
    """Assemble four quadrant patches back into the full image.

    With ``denormalize`` set, normalized patches are flipped back to their
    raw orientation first.
    """
    by_quadrant: dict[Quadrant, QuadrantPatch] = {}
    for p in patches:
        if p.quadrant in by_quadrant:
            raise ValueError(f"duplicate quadrant {p.quadrant.value}")
        by_quadrant[p.quadrant] = p
    missing = [q.value for q in Quadrant if q not in by_quadrant]
    if missing:
        raise ValueError(f"missing quadrants: {', '.join(missing)}")
    shapes = {p.data.shape for p in by_quadrant.values()}
    if len(shapes) != 1:
        raise ValueError(f"patch dims differ: {sorted(shapes)}")

    def raw(q: Quadrant) -> np.ndarray:
        p = by_quadrant[q]
        if denormalize and p.normalized:
            return _flipped(p.data, q)
        return p.data

    (hu, hv) = shapes.pop()
    out = np.empty((2 * hu, 2 * hv), dtype=by_quadrant[Quadrant.Q1].data.dtype)
    out[hu:, hv:] = raw(Quadrant.Q1)
    out[:hu, hv:] = raw(Quadrant.Q2)
    out[:hu, :hv] = raw(Quadrant.Q3)
    out[hu:, :hv] = raw(Quadrant.Q4)
    return out
