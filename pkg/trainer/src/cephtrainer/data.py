"""Dataset access: the trainer consumes exported patch-pair datasets purely
through their on-disk format (a TSV manifest plus PNG files), so it stays
decoupled from whatever produced them.

Manifest format: optional '#' comment lines, then the exact header
``input\ttarget\tquadrant\tpatient\tsplit``, then one tab-separated record
per line with image paths relative to the manifest's directory.  Inputs are
RGB (red/blue = one view, green = the opposing view); targets are grayscale.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

PAIR_MANIFEST_HEADER = "input\ttarget\tquadrant\tpatient\tsplit"
INPUT_MODES = ("dual", "single")


@dataclass(frozen=True)
class PairRecord:
    input_path: str
    target_path: str
    quadrant: str
    patient_id: str
    split: str


def read_pair_manifest(path) -> list[PairRecord]:
    """Parse a patch-pair manifest into records; paths stay relative."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body or body[0] != PAIR_MANIFEST_HEADER:
        raise ValueError(f"{path}: missing manifest header {PAIR_MANIFEST_HEADER!r}")
    records = []
    for ln in body[1:]:
        parts = ln.split("\t")
        if len(parts) != 5:
            raise ValueError(f"{path}: malformed manifest line {ln!r}")
        records.append(PairRecord(*parts))
    return records


def load_png(path) -> np.ndarray:
    """8-bit PNG to a (H, W) or (H, W, 3) uint8 array."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        return np.asarray(im, dtype=np.uint8)


def to_unit(arr: np.ndarray) -> torch.Tensor:
    """uint8 [0, 255] -> float32 [-1, 1], channels-first."""
    t = torch.from_numpy(arr.astype(np.float32) / 127.5 - 1.0)
    return t.unsqueeze(0) if t.ndim == 2 else t.permute(2, 0, 1)


def from_unit(t: torch.Tensor) -> np.ndarray:
    """float [-1, 1] -> float gray levels [0, 255] (not quantized)."""
    return ((t.detach().cpu().numpy() + 1.0) * 127.5).clip(0.0, 255.0)


class PairDataset:
    """Patch pairs of one split as (input, target) tensors in [-1, 1].

    ``mode`` selects the input channels: "dual" keeps all three (both
    views), "single" keeps only the red channel (the base view), which is
    how the one-projection ablation is run.
    """

    def __init__(self, manifest, split: str, mode: str = "dual"):
        if mode not in INPUT_MODES:
            raise ValueError(f"mode must be one of {INPUT_MODES}, got {mode!r}")
        manifest = Path(manifest)
        self.root = manifest.parent
        self.mode = mode
        self.records = [r for r in read_pair_manifest(manifest) if r.split == split]
        if not self.records:
            raise ValueError(f"{manifest}: empty {split!r} split")

    @property
    def in_channels(self) -> int:
        return 3 if self.mode == "dual" else 1

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i: int) -> tuple[torch.Tensor, torch.Tensor]:
        r = self.records[i]
        x = load_png(self.root / r.input_path)
        y = load_png(self.root / r.target_path)
        if x.ndim != 3 or x.shape[2] != 3:
            raise ValueError(f"{r.input_path}: expected an RGB input patch")
        if y.ndim != 2:
            raise ValueError(f"{r.target_path}: expected a grayscale target patch")
        xt = to_unit(x)
        if self.mode == "single":
            xt = xt[:1]
        return xt, to_unit(y)
