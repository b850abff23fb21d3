"""Shared interpolation kernels.

All samplers take fractional array indices, not world coordinates: callers
convert with their own origin/spacing bookkeeping.  Coordinates that land
within SNAP_EPS of an integer index are snapped onto it before the weights
are formed, so sampling exactly on the grid reproduces stored values
bit-for-bit instead of picking up O(1e-16) lerp noise.
"""

from __future__ import annotations

import numpy as np

# Widest snap that is still far below half a voxel at any realistic grid
# size; keeps integer-translation resampling exact after origin round trips.
SNAP_EPS = 1e-6


def _snap(c: np.ndarray) -> np.ndarray:
    r = np.rint(c)
    return np.where(np.abs(c - r) <= SNAP_EPS, r, c)


def _axis_cells(c: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower cell index, upper cell index and fractional weight along one axis."""
    i0 = np.floor(c).astype(np.intp)
    np.clip(i0, 0, max(n - 2, 0), out=i0)
    i1 = np.minimum(i0 + 1, n - 1)
    f = c - i0
    return i0, i1, f


def sample_trilinear(data: np.ndarray, ix, iy, iz, fill: float) -> np.ndarray:
    """Trilinear sample of ``data`` at fractional indices; out of range -> fill.

    ``data`` must be a C-contiguous (nx, ny, nz) float array.  The valid
    domain is the closed index box [0, n-1] per axis.
    """
    nx, ny, nz = data.shape
    ix = _snap(np.asarray(ix, dtype=np.float64))
    iy = _snap(np.asarray(iy, dtype=np.float64))
    iz = _snap(np.asarray(iz, dtype=np.float64))
    ix, iy, iz = np.broadcast_arrays(ix, iy, iz)

    inside = (
        (ix >= 0.0) & (ix <= nx - 1)
        & (iy >= 0.0) & (iy <= ny - 1)
        & (iz >= 0.0) & (iz <= nz - 1)
    )

    x0, x1, fx = _axis_cells(np.where(inside, ix, 0.0), nx)
    y0, y1, fy = _axis_cells(np.where(inside, iy, 0.0), ny)
    z0, z1, fz = _axis_cells(np.where(inside, iz, 0.0), nz)

    flat = data.reshape(-1)
    sy = nz
    sx = ny * nz

    def corner(ax, ay, az):
        return flat[ax * sx + ay * sy + az]

    c000 = corner(x0, y0, z0)
    c001 = corner(x0, y0, z1)
    c010 = corner(x0, y1, z0)
    c011 = corner(x0, y1, z1)
    c100 = corner(x1, y0, z0)
    c101 = corner(x1, y0, z1)
    c110 = corner(x1, y1, z0)
    c111 = corner(x1, y1, z1)

    gz = 1.0 - fz
    c00 = c000 * gz + c001 * fz
    c01 = c010 * gz + c011 * fz
    c10 = c100 * gz + c101 * fz
    c11 = c110 * gz + c111 * fz
    gy = 1.0 - fy
    c0 = c00 * gy + c01 * fy
    c1 = c10 * gy + c11 * fy
    out = c0 * (1.0 - fx) + c1 * fx
    return np.where(inside, out, fill)


def sample_bilinear(data: np.ndarray, iu, iv, fill: float) -> np.ndarray:
    """Bilinear sample of a 2-D array at fractional indices; out of range -> fill."""
    nu, nv = data.shape
    iu = _snap(np.asarray(iu, dtype=np.float64))
    iv = _snap(np.asarray(iv, dtype=np.float64))
    iu, iv = np.broadcast_arrays(iu, iv)

    inside = (iu >= 0.0) & (iu <= nu - 1) & (iv >= 0.0) & (iv <= nv - 1)

    u0, u1, fu = _axis_cells(np.where(inside, iu, 0.0), nu)
    v0, v1, fv = _axis_cells(np.where(inside, iv, 0.0), nv)

    c00 = data[u0, v0]
    c01 = data[u0, v1]
    c10 = data[u1, v0]
    c11 = data[u1, v1]

    gv = 1.0 - fv
    c0 = c00 * gv + c01 * fv
    c1 = c10 * gv + c11 * fv
    out = c0 * (1.0 - fu) + c1 * fu
    return np.where(inside, out, fill)
