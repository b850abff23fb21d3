"""Image-quality metrics, line profiles, and landmark detection rates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._interp import sample_bilinear
from .film import Cephalogram8
from .projector import IntegralImage

N_LANDMARKS = 19
DEFAULT_RADII = (2.0, 2.5, 3.0, 4.0)


def _image_data(img) -> tuple[np.ndarray, tuple[float, float]]:
    if isinstance(img, Cephalogram8):
        return img.data.astype(np.float64), img.spacing
    if isinstance(img, IntegralImage):
        return img.data, img.spacing
    return np.asarray(img, dtype=np.float64), (1.0, 1.0)


def rmse(a, b) -> float:
    """Root-mean-square difference over all pixels (float arithmetic)."""
    da, _ = _image_data(a)
    db, _ = _image_data(b)
    if da.shape != db.shape:
        raise ValueError(f"image dims differ: {da.shape} vs {db.shape}")
    diff = da - db
    return float(np.sqrt(np.mean(diff * diff)))


def psnr(a, b, peak: float = 255.0) -> float:
    """20*log10(peak/rmse); identical images return the +inf sentinel."""
    err = rmse(a, b)
    if err == 0.0:
        return math.inf
    return 20.0 * math.log10(peak / err)


def line_profile(img, p0, p1, n: int, spacing=None) -> np.ndarray:
    """n bilinear samples uniformly spaced from p0 to p1, endpoints included.

    Coordinates are in mm relative to the center of pixel (0, 0); plain
    arrays default to 1 mm pixels unless ``spacing`` is given.
    """
    if n < 2:
        raise ValueError("need n >= 2 samples")
    data, sp = _image_data(img)
    if spacing is not None:
        sp = (float(spacing[0]), float(spacing[1]))
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    hi = ((data.shape[0] - 1) * sp[0], (data.shape[1] - 1) * sp[1])
    for name, p in (("p0", p0), ("p1", p1)):
        if not (0.0 <= p[0] <= hi[0] and 0.0 <= p[1] <= hi[1]):
            raise ValueError(f"endpoint {name} = {tuple(p)} outside image extent {hi}")
    frac = np.linspace(0.0, 1.0, n)
    pts = p0[None, :] + frac[:, None] * (p1 - p0)[None, :]
    return sample_bilinear(data, pts[:, 0] / sp[0], pts[:, 1] / sp[1], fill=0.0)


@dataclass(frozen=True)
class LandmarkSet:
    """The 19 cephalometric landmarks: labeled (y, z) positions in mm."""

    points: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        labels = tuple(str(x) for x in self.labels)
        if pts.shape != (N_LANDMARKS, 2):
            raise ValueError(f"expected {N_LANDMARKS} (y, z) points, got {pts.shape}")
        if len(labels) != N_LANDMARKS:
            raise ValueError(f"expected {N_LANDMARKS} labels, got {len(labels)}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmark coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class SdrTable:
    """Successful detection rates (%) per precision radius (mm)."""

    radii: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        rates = tuple(float(r) for r in self.rates)
        if len(radii) != len(rates) or not radii:
            raise ValueError("radii and rates must be parallel, non-empty")
        order = np.argsort(radii)
        sorted_rates = np.asarray(rates)[order]
        if (np.diff(sorted_rates) < 0).any():
            raise ValueError("rates must be non-decreasing in radius")
        if any(not 0.0 <= r <= 100.0 for r in rates):
            raise ValueError("rates must lie in [0, 100]")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "rates", rates)

    def format_table(self) -> str:
        head = "  ".join(f"{r:>7.2f}mm" for r in self.radii)
        body = "  ".join(f"{v:>8.2f}%" for v in self.rates)
        return f"radius  {head}\nSDR     {body}"

    def to_tsv(self) -> str:
        lines = ["radius_mm\tsdr_percent"]
        lines += [f"{r:g}\t{v:.4f}" for r, v in zip(self.radii, self.rates)]
        return "\n".join(lines) + "\n"


def sdr(detected: LandmarkSet, reference: LandmarkSet, radii=DEFAULT_RADII) -> SdrTable:
    """Fraction of landmarks within each radius of the reference, in percent.

    Distances are Euclidean in mm; the boundary counts as a success
    (||d|| <= r).  Labels must match in content and order.
    """
    if detected.labels != reference.labels:
        raise ValueError("landmark labels do not match between the two sets")
    d = np.linalg.norm(detected.points - reference.points, axis=1)
    radii = tuple(float(r) for r in radii)
    rates = tuple(100.0 * float((d <= r).sum()) / N_LANDMARKS for r in radii)
    return SdrTable(radii, rates)


def save_landmarks(ls: LandmarkSet, path) -> Path:
    path = Path(path)
    lines = [f"{lab}\t{p[0]:.6g}\t{p[1]:.6g}" for lab, p in zip(ls.labels, ls.points)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_landmarks(path, pixel_spacing=None) -> LandmarkSet:
    """Read a landmark TSV (label, y, z per line; mm units).

    ``pixel_spacing`` converts pixel-indexed files to mm on the fly.
    """
    path = Path(path)
    labels, pts = [], []
    for ln in path.read_text(encoding="utf-8").splitlines():
        if not ln.strip() or ln.startswith("#"):
            continue
        parts = ln.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}: malformed landmark line {ln!r}")
        labels.append(parts[0])
        pts.append((float(parts[1]), float(parts[2])))
    arr = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    if pixel_spacing is not None:
        arr = arr * np.asarray(pixel_spacing, dtype=np.float64)[None, :]
    return LandmarkSet(arr, tuple(labels))
