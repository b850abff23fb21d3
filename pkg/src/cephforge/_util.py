"""Small shared numeric helpers."""

from __future__ import annotations

import numpy as np


def round_half_away(x) -> np.ndarray:
    """Round to nearest integer, ties away from zero (0.5 -> 1, -0.5 -> -1)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def to_gray8(x) -> np.ndarray:
    """Clamp to [0, 255] and round half-away-from-zero to uint8."""
    return np.clip(round_half_away(x), 0.0, 255.0).astype(np.uint8)
