"""Quantization, patch-pair export/import, and SR dataset preparation.

Manifests are UTF-8 tab-separated files with one record per line and all
image paths relative to the manifest's directory; rewriting a dataset from
the same inputs is byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from ._util import round_half_away, to_gray8
from .cephgeom import DualRgbPatch, Quadrant
from .film import Cephalogram8
from .projector import IntegralImage

SPLITS = ("train", "val", "test")
# train/val/test proportions used when assigning whole patients to splits
SPLIT_RATIOS = (1600, 40, 200)

PAIR_MANIFEST_HEADER = "input\ttarget\tquadrant\tpatient\tsplit"
SR_MANIFEST_HEADER = "hr\tlr\tilr\tblur_level"
BLUR_LEVELS = ("x5", "x10x2")


# ---------------------------------------------------------------------------
# quantization


def quantize_array(a, lo: float = 0.0, hi: float = 6.0) -> np.ndarray:
    """Clamp to [lo, hi], map linearly to [0, 255], round half away from zero."""
    if not hi > lo:
        raise ValueError("require hi > lo")
    a = np.clip(np.asarray(a, dtype=np.float64), lo, hi)
    return to_gray8((a - lo) * (255.0 / (hi - lo)))


def dequantize_array(q, lo: float = 0.0, hi: float = 6.0) -> np.ndarray:
    """Inverse of the linear map (rounding loss stays, by construction)."""
    return lo + np.asarray(q, dtype=np.float64) * ((hi - lo) / 255.0)


def quantize_integral(g, lo: float = 0.0, hi: float = 6.0) -> Cephalogram8:
    """Quantize an integral image to 8 bits, keeping its pixel spacing."""
    if isinstance(g, IntegralImage):
        return Cephalogram8(quantize_array(g.data, lo, hi), g.spacing)
    return Cephalogram8(quantize_array(g, lo, hi))


# ---------------------------------------------------------------------------
# resampling


def downsample_avg(img, factor: int) -> np.ndarray:
    """Block-mean downsampling; non-divisible dims are center-cropped first."""
    if factor < 1 or int(factor) != factor:
        raise ValueError("factor must be a positive integer")
    factor = int(factor)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array")
    if factor == 1:
        return arr.copy()
    h, w = (n // factor * factor for n in arr.shape)
    if h == 0 or w == 0:
        raise ValueError(f"image {arr.shape} smaller than one {factor}x{factor} block")
    r0 = (arr.shape[0] - h) // 2
    c0 = (arr.shape[1] - w) // 2
    arr = arr[r0 : r0 + h, c0 : c0 + w]
    return arr.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def _cubic_weights(d: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Keys cubic kernel (Catmull-Rom at a = -0.5)."""
    ad = np.abs(d)
    w = np.where(
        ad <= 1.0,
        (a + 2.0) * ad**3 - (a + 3.0) * ad**2 + 1.0,
        np.where(ad < 2.0, a * (ad**3 - 5.0 * ad**2 + 8.0 * ad - 4.0), 0.0),
    )
    return w


def _upsample_axis(arr: np.ndarray, factor: int, axis: int) -> np.ndarray:
    n = arr.shape[axis]
    nout = n * factor
    # align-corners-false source coordinates with clamp-to-edge taps
    src = (np.arange(nout) + 0.5) / factor - 0.5
    base = np.floor(src).astype(np.intp)
    taps = base[:, None] + np.arange(-1, 3)[None, :]
    weights = _cubic_weights(src[:, None] - taps)
    taps = np.clip(taps, 0, n - 1)
    moved = np.moveaxis(arr, axis, 0)
    gathered = moved[taps]  # (nout, 4, rest...)
    out = (gathered * weights.reshape(nout, 4, *([1] * (moved.ndim - 1)))).sum(axis=1)
    return np.moveaxis(out, 0, axis)


def upsample_bicubic(img, factor: int) -> np.ndarray:
    """Separable Catmull-Rom bicubic upsampling (align-corners-false).

    Output dims are factor times the input dims; edges clamp.
    """
    if factor < 1 or int(factor) != factor:
        raise ValueError("factor must be a positive integer")
    factor = int(factor)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array")
    if factor == 1:
        return arr.copy()
    return _upsample_axis(_upsample_axis(arr, factor, 0), factor, 1)


# ---------------------------------------------------------------------------
# patch-pair export


@dataclass(frozen=True)
class PatchPairRecord:
    """One manifest line: dual-projection input, target, bookkeeping."""

    input_path: str
    target_path: str
    quadrant: Quadrant
    patient_id: str
    split: str

    def __post_init__(self):
        if not isinstance(self.quadrant, Quadrant):
            object.__setattr__(self, "quadrant", Quadrant(self.quadrant))
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass(frozen=True)
class PatchPairSample:
    """In-memory pair before export: RGB input patch + 8-bit target patch."""

    input_rgb: np.ndarray
    target: np.ndarray
    quadrant: Quadrant
    patient_id: str
    split: str

    def __post_init__(self):
        rgb = self.input_rgb.to_array() if isinstance(self.input_rgb, DualRgbPatch) else np.asarray(self.input_rgb)
        target = np.asarray(self.target)
        if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
            raise ValueError("input_rgb must be (u, v, 3) uint8")
        if target.ndim != 2 or target.dtype != np.uint8:
            raise ValueError("target must be 2-D uint8")
        if rgb.shape[:2] != target.shape:
            raise ValueError(f"input dims {rgb.shape[:2]} != target dims {target.shape}")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        object.__setattr__(self, "input_rgb", rgb)
        object.__setattr__(self, "target", target)
        if not isinstance(self.quadrant, Quadrant):
            object.__setattr__(self, "quadrant", Quadrant(self.quadrant))


def split_counts(n: int, ratios: tuple[int, int, int] = SPLIT_RATIOS) -> tuple[int, int, int]:
    """Partition n items into train/val/test by the standard proportions."""
    total = sum(ratios)
    n_val = int(round(n * ratios[1] / total))
    n_test = int(round(n * ratios[2] / total))
    n_train = n - n_val - n_test
    if n_train < 0:
        raise ValueError(f"cannot split {n} items with ratios {ratios}")
    return n_train, n_val, n_test


def assign_splits(patient_ids) -> dict[str, str]:
    """Deterministic whole-patient split assignment in list order."""
    ids = list(patient_ids)
    n_train, n_val, _ = split_counts(len(ids))
    out = {}
    for i, pid in enumerate(ids):
        out[pid] = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
    return out


def export_pairs(samples, root) -> Path:
    """Write patch-pair images + manifest under ``root``; returns manifest path.

    Ordering is deterministic by (patient, quadrant); duplicate records for
    the same patient and quadrant are an error.
    """
    root = Path(root)
    (root / "input").mkdir(parents=True, exist_ok=True)
    (root / "target").mkdir(parents=True, exist_ok=True)
    ordered = sorted(samples, key=lambda s: (s.patient_id, s.quadrant.value))
    seen = set()
    lines = [PAIR_MANIFEST_HEADER]
    for s in ordered:
        key = (s.patient_id, s.quadrant.value)
        if key in seen:
            raise ValueError(f"duplicate output path for patient {key[0]} quadrant {key[1]}")
        seen.add(key)
        stem = f"{s.patient_id}_{s.quadrant.value}.png"
        in_rel = f"input/{stem}"
        tg_rel = f"target/{stem}"
        fileio.save_rgb8(root / in_rel, s.input_rgb)
        fileio.save_gray8(root / tg_rel, s.target)
        lines.append("\t".join([in_rel, tg_rel, s.quadrant.value, s.patient_id, s.split]))
    manifest = root / "manifest.tsv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def read_manifest(path, verify: bool = False) -> list[PatchPairRecord]:
    """Parse a patch-pair manifest; ``verify`` also checks the image files
    exist with matching dims."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body or body[0] != PAIR_MANIFEST_HEADER:
        raise ValueError(f"{path}: missing manifest header")
    records = []
    for ln in body[1:]:
        parts = ln.split("\t")
        if len(parts) != 5:
            raise ValueError(f"{path}: malformed record {ln!r}")
        rec = PatchPairRecord(parts[0], parts[1], Quadrant(parts[2]), parts[3], parts[4])
        if verify:
            rgb = fileio.load_image8(path.parent / rec.input_path)
            tgt = fileio.load_image8(path.parent / rec.target_path)
            if rgb.shape[:2] != tgt.shape[:2]:
                raise ValueError(f"{path}: dims mismatch for {rec.patient_id}")
        records.append(rec)
    return records


# ---------------------------------------------------------------------------
# super-resolution dataset


@dataclass(frozen=True)
class SrRecord:
    """Aligned (HR, LR, ILR) triple; LR is 1/5 the HR size, ILR matches HR."""

    hr_path: str
    lr_path: str
    ilr_path: str
    blur_level: str

    def __post_init__(self):
        if self.blur_level not in BLUR_LEVELS:
            raise ValueError(f"blur_level must be one of {BLUR_LEVELS}")


def _grid_positions(extent: int, count: int) -> np.ndarray:
    if count == 1:
        return np.array([extent // 2])
    return np.round(np.linspace(0, extent, count)).astype(int)


def make_sr_dataset(
    cephalograms,
    root,
    hr_patch: int = 320,
    per_image: int = 42,
    seed: int = 0,
    jitter: int = 16,
) -> tuple[list[SrRecord], Path]:
    """Cut aligned SR training triples out of high-resolution cephalograms.

    ``cephalograms`` is an iterable of (image_id, 2-D uint8 array) pairs at
    the HR pixel pitch.  Patches sit on a near-square grid with a seeded
    jitter of up to ``jitter`` px, snapped to multiples of 10 so both blur
    levels stay block-aligned; levels alternate x5 / x10x2 per patch.

    x5:    LR = rounded 5x5 block mean of HR; ILR = bicubic x5 of LR.
    x10x2: LR = bicubic x2 of the rounded 10x10 block mean; ILR likewise.
    """
    if hr_patch % 10:
        raise ValueError("hr_patch must be a multiple of 10")
    if per_image < 1:
        raise ValueError("per_image must be >= 1")
    root = Path(root)
    for sub in ("hr", "lr", "ilr"):
        (root / sub).mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    records: list[SrRecord] = []
    for image_id, img in cephalograms:
        arr = np.asarray(img.data if isinstance(img, Cephalogram8) else img)
        if arr.dtype != np.uint8 or arr.ndim != 2:
            raise ValueError(f"{image_id}: expected a 2-D uint8 cephalogram")
        if arr.shape[0] < hr_patch or arr.shape[1] < hr_patch:
            raise ValueError(
                f"{image_id}: image {arr.shape} smaller than one "
                f"{hr_patch}x{hr_patch} HR patch"
            )
        cols = math.ceil(math.sqrt(per_image))
        rows = math.ceil(per_image / cols)
        max_r = arr.shape[0] - hr_patch
        max_c = arr.shape[1] - hr_patch
        grid = [
            (r, c)
            for r in _grid_positions(max_r, rows)
            for c in _grid_positions(max_c, cols)
        ][:per_image]
        for idx, (gr, gc) in enumerate(grid):
            jr, jc = rng.integers(-jitter, jitter + 1, size=2)
            r = min(max(int(gr) + int(jr), 0), max_r) // 10 * 10
            c = min(max(int(gc) + int(jc), 0), max_c) // 10 * 10
            hr = arr[r : r + hr_patch, c : c + hr_patch]
            level = BLUR_LEVELS[idx % 2]
            if level == "x5":
                lr = to_gray8(downsample_avg(hr, 5))
            else:
                lr = to_gray8(upsample_bicubic(to_gray8(downsample_avg(hr, 10)), 2))
            ilr = to_gray8(upsample_bicubic(lr.astype(np.float64), 5))
            stem = f"{image_id}_p{idx:02d}.png"
            fileio.save_gray8(root / "hr" / stem, hr)
            fileio.save_gray8(root / "lr" / stem, lr)
            fileio.save_gray8(root / "ilr" / stem, ilr)
            records.append(SrRecord(f"hr/{stem}", f"lr/{stem}", f"ilr/{stem}", level))

    manifest = root / "sr_manifest.tsv"
    lines = [f"# seed={seed}", SR_MANIFEST_HEADER]
    lines += ["\t".join([r.hr_path, r.lr_path, r.ilr_path, r.blur_level]) for r in records]
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return records, manifest


def read_sr_manifest(path) -> tuple[list[SrRecord], int | None]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    seed = None
    for ln in lines:
        if ln.startswith("# seed="):
            seed = int(ln.split("=", 1)[1])
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body or body[0] != SR_MANIFEST_HEADER:
        raise ValueError(f"{path}: missing SR manifest header")
    records = []
    for ln in body[1:]:
        parts = ln.split("\t")
        if len(parts) != 4:
            raise ValueError(f"{path}: malformed record {ln!r}")
        records.append(SrRecord(*parts))
    return records, seed
