"""Sidecar metadata and image file IO.

Conventions shared by every serialized artifact:

* Sidecar files are UTF-8 ``key=value`` lines; blank lines and ``#`` comments
  are ignored.  Keys are unique; the writer emits insertion order so reruns
  are byte-identical.
* 2-D arrays are indexed ``[u, v]`` with u along +y (screen right) and v
  along +z (screen up).  PNG/PGM rasters store row 0 at the top, so row r of
  the file holds v = nv-1-r: ``rows = arr.T[::-1]``.
* PNG is written through Pillow; when Pillow is unavailable the writers fall
  back to binary PGM/PPM (the returned path carries the actual suffix).
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

try:
    from PIL import Image

    _HAVE_PIL = True
except ImportError:  # pragma: no cover - exercised only without Pillow
    _HAVE_PIL = False


def read_keyvalues(path: str | os.PathLike) -> dict[str, str]:
    """Parse a key=value sidecar file into an ordered dict of strings."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_keyvalues(path: str | os.PathLike, items: dict[str, str]) -> Path:
    path = Path(path)
    lines = [f"{k}={v}" for k, v in items.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def parse_floats(text: str, n: int, what: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != n:
        raise ValueError(f"{what}: expected {n} values, got {text!r}")
    return tuple(float(p) for p in parts)


def parse_ints(text: str, n: int, what: str) -> tuple[int, ...]:
    vals = parse_floats(text, n, what)
    out = tuple(int(v) for v in vals)
    if any(float(i) != v for i, v in zip(out, vals)):
        raise ValueError(f"{what}: expected integers, got {text!r}")
    return out


# ---------------------------------------------------------------------------
# 8-bit image rasters


def _to_rows(arr: np.ndarray) -> np.ndarray:
    # (u, v) -> raster rows, top row = largest v
    if arr.ndim == 2:
        return np.ascontiguousarray(arr.T[::-1])
    return np.ascontiguousarray(arr.transpose(1, 0, 2)[::-1])


def _from_rows(rows: np.ndarray) -> np.ndarray:
    if rows.ndim == 2:
        return np.ascontiguousarray(rows[::-1].T)
    return np.ascontiguousarray(rows[::-1].transpose(1, 0, 2))


def _write_pnm(path: Path, rows: np.ndarray) -> Path:
    magic = b"P5" if rows.ndim == 2 else b"P6"
    h, w = rows.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(rows.astype(np.uint8).tobytes())
    return path


def _read_pnm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    magic, w, h = fields[0], int(fields[1]), int(fields[2])
    if int(fields[3]) != 255:
        raise ValueError(f"{path}: only 8-bit PNM supported")
    channels = {b"P5": 1, b"P6": 3}.get(magic)
    if channels is None:
        raise ValueError(f"{path}: unsupported PNM magic {magic!r}")
    raw = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=pos)
    rows = raw.reshape((h, w) if channels == 1 else (h, w, channels))
    return rows


def save_gray8(path: str | os.PathLike, arr: np.ndarray) -> Path:
    """Write a (u, v) uint8 array as 8-bit grayscale PNG (PGM fallback)."""
    path = Path(path)
    arr = np.asarray(arr)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise ValueError("save_gray8 expects a 2-D uint8 array")
    rows = _to_rows(arr)
    if _HAVE_PIL:
        Image.fromarray(rows, mode="L").save(path, format="PNG")
        return path
    return _write_pnm(path.with_suffix(".pgm"), rows)


def save_rgb8(path: str | os.PathLike, arr: np.ndarray) -> Path:
    """Write a (u, v, 3) uint8 array as 8-bit RGB PNG (PPM fallback)."""
    path = Path(path)
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError("save_rgb8 expects a (u, v, 3) uint8 array")
    rows = _to_rows(arr)
    if _HAVE_PIL:
        Image.fromarray(rows, mode="RGB").save(path, format="PNG")
        return path
    return _write_pnm(path.with_suffix(".ppm"), rows)


def load_image8(path: str | os.PathLike) -> np.ndarray:
    """Read an 8-bit PNG/PGM/PPM into (u, v) or (u, v, 3) uint8."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if path.suffix.lower() in (".pgm", ".ppm", ".pnm"):
        rows = _read_pnm(path)
    else:
        if not _HAVE_PIL:  # pragma: no cover
            raise RuntimeError("PNG support unavailable; install Pillow or use PGM")
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if "A" in im.mode or len(im.mode) > 2 else "L")
            rows = np.asarray(im, dtype=np.uint8)
    return _from_rows(rows)
