import numpy as np
import pytest
import torch
from PIL import Image

from cephtrainer import PAIR_MANIFEST_HEADER, PairDataset, read_pair_manifest
from cephtrainer.data import from_unit, load_png, to_unit


def _write_png(path, arr):
    Image.fromarray(arr, mode="RGB" if arr.ndim == 3 else "L").save(path)


def _write_pairs(root, n, size=32, seed=0, n_val=0):
    rng = np.random.default_rng(seed)
    rows = [PAIR_MANIFEST_HEADER]
    for i in range(n + n_val):
        rgb = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        tgt = rng.integers(0, 256, size=(size, size), dtype=np.uint8)
        _write_png(root / f"c{i:02d}_in.png", rgb)
        _write_png(root / f"c{i:02d}_gt.png", tgt)
        split = "train" if i < n else "val"
        rows.append(f"c{i:02d}_in.png\tc{i:02d}_gt.png\tQ1\tP{i:02d}\t{split}")
    manifest = root / "manifest.tsv"
    manifest.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return manifest


def test_read_pair_manifest_roundtrip(tmp_path):
    lines = [
        "# exported pairs",
        PAIR_MANIFEST_HEADER,
        "a_in.png\ta_gt.png\tQ2\tP00\ttrain",
        "b_in.png\tb_gt.png\tQ3\tP01\tval",
    ]
    path = tmp_path / "manifest.tsv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    records = read_pair_manifest(path)
    assert len(records) == 2
    assert records[0].input_path == "a_in.png"
    assert records[0].quadrant == "Q2"
    assert records[1].patient_id == "P01"
    assert records[1].split == "val"


def test_read_pair_manifest_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_pair_manifest(tmp_path / "nope.tsv")


def test_read_pair_manifest_rejects_bad_header(tmp_path):
    path = tmp_path / "manifest.tsv"
    path.write_text("input\ttarget\n", encoding="utf-8")
    with pytest.raises(ValueError, match="header"):
        read_pair_manifest(path)


def test_read_pair_manifest_rejects_short_line(tmp_path):
    path = tmp_path / "manifest.tsv"
    path.write_text(PAIR_MANIFEST_HEADER + "\na\tb\tQ1\tP0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="malformed"):
        read_pair_manifest(path)


def test_load_png_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    rgb = rng.integers(0, 256, size=(8, 6, 3), dtype=np.uint8)
    gray = rng.integers(0, 256, size=(8, 6), dtype=np.uint8)
    _write_png(tmp_path / "rgb.png", rgb)
    _write_png(tmp_path / "gray.png", gray)
    np.testing.assert_array_equal(load_png(tmp_path / "rgb.png"), rgb)
    np.testing.assert_array_equal(load_png(tmp_path / "gray.png"), gray)


def test_to_unit_from_unit_roundtrip():
    rng = np.random.default_rng(2)
    gray = rng.integers(0, 256, size=(8, 6), dtype=np.uint8)
    t = to_unit(gray)
    assert t.shape == (1, 8, 6)
    assert t.dtype == torch.float32
    assert t.min() >= -1.0 and t.max() <= 1.0
    np.testing.assert_allclose(from_unit(t)[0], gray.astype(np.float64), atol=1e-3)
    rgb = rng.integers(0, 256, size=(8, 6, 3), dtype=np.uint8)
    assert to_unit(rgb).shape == (3, 8, 6)


def test_pair_dataset_dual_and_single_modes(tmp_path):
    manifest = _write_pairs(tmp_path, 4)
    dual = PairDataset(manifest, "train", "dual")
    single = PairDataset(manifest, "train", "single")
    assert (len(dual), dual.in_channels) == (4, 3)
    assert (len(single), single.in_channels) == (4, 1)
    xd, yd = dual[1]
    xs, ys = single[1]
    assert xd.shape == (3, 32, 32)
    assert xs.shape == (1, 32, 32)
    # single mode keeps the red channel, the base view
    assert torch.equal(xs[0], xd[0])
    assert torch.equal(ys, yd)


def test_pair_dataset_empty_split_raises(tmp_path):
    manifest = _write_pairs(tmp_path, 3, n_val=0)
    with pytest.raises(ValueError, match="empty"):
        PairDataset(manifest, "val")


def test_pair_dataset_rejects_unknown_mode(tmp_path):
    manifest = _write_pairs(tmp_path, 2)
    with pytest.raises(ValueError, match="mode"):
        PairDataset(manifest, "train", "both")


def test_pair_dataset_validates_image_modes(tmp_path):
    rng = np.random.default_rng(3)
    gray = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
    rgb = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
    _write_png(tmp_path / "gray.png", gray)
    _write_png(tmp_path / "rgb.png", rgb)
    manifest = tmp_path / "manifest.tsv"
    manifest.write_text(
        PAIR_MANIFEST_HEADER + "\ngray.png\tgray.png\tQ1\tP0\ttrain\n", encoding="utf-8"
    )
    ds = PairDataset(manifest, "train")
    with pytest.raises(ValueError, match="RGB input"):
        ds[0]
    manifest.write_text(
        PAIR_MANIFEST_HEADER + "\nrgb.png\trgb.png\tQ1\tP0\ttrain\n", encoding="utf-8"
    )
    ds = PairDataset(manifest, "train")
    with pytest.raises(ValueError, match="grayscale target"):
        ds[0]
