"""Release acceptance gate for the trainer: one test per criterion, one
verdict line each.

Run `pytest tests/test_acceptance.py -s -v` to see the verdict lines; a
criterion fails loudly with every violated sub-check in the message.
"""

import numpy as np
import torch
from PIL import Image

from cephtrainer import (
    PAIR_MANIFEST_HEADER,
    TrainConfig,
    sobel_weight_map,
    train,
    weighted_l1,
)


def _checks():
    failures = []

    def check(cond, msg):
        if not bool(cond):
            failures.append(msg)

    return failures, check


def _gate(name, failures):
    print(f"\n[{'FAIL' if failures else 'PASS'}] {name}")
    assert not failures, f"{name}: " + "; ".join(failures)


def _block_image(rng, size, block):
    tiles = rng.integers(0, 256, size=(size // block, size // block))
    return np.kron(tiles, np.ones((block, block))).astype(np.uint8)


def _make_dataset(root, n_train, n_val, size, block, seed, opposing_target):
    """Synthetic pairs; with opposing_target the label is the green channel,
    an independent image only the dual-input model can see."""
    rng = np.random.default_rng(seed)
    rows = [PAIR_MANIFEST_HEADER]
    for i in range(n_train + n_val):
        base = _block_image(rng, size, block)
        if opposing_target:
            other = _block_image(rng, size, block)
            label = other
        else:
            other = np.roll(base, size // 8, axis=1)
            label = 255 - base
        rgb = np.stack([base, other, base], axis=-1).astype(np.uint8)
        Image.fromarray(rgb, mode="RGB").save(root / f"c{i:02d}_in.png")
        Image.fromarray(label.astype(np.uint8), mode="L").save(root / f"c{i:02d}_gt.png")
        split = "train" if i < n_train else "val"
        rows.append(f"c{i:02d}_in.png\tc{i:02d}_gt.png\tQ1\tP{i:02d}\t{split}")
    manifest = root / "manifest.tsv"
    manifest.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return manifest


def test_trainer_smoke_suite(tmp_path):
    failures, check = _checks()

    # seeded 5-epoch run on 32 synthetic pairs must reduce the training l1
    manifest = _make_dataset(tmp_path, 24, 8, size=64, block=8, seed=11,
                             opposing_target=False)
    cfg = TrainConfig.smoke()
    first = train(manifest, cfg, tmp_path / "run_a")
    check(len(first.history) == 5, "expected 5 epochs of history")
    check(
        first.history[-1]["train_l1"] < first.history[0]["train_l1"],
        f"train l1 did not descend: {first.history[0]['train_l1']:.3f} -> "
        f"{first.history[-1]['train_l1']:.3f}",
    )
    check(first.checkpoint.exists(), "checkpoint not written")

    # the run is fully seeded: re-running writes a byte-identical log
    second = train(manifest, cfg, tmp_path / "run_b")
    check(first.log.read_bytes() == second.log.read_bytes(),
          "identical seeds produced different metrics logs")

    # the weighted-l1 gradient matches central finite differences to 1e-4
    rng = np.random.default_rng(3)
    target = torch.from_numpy(rng.normal(size=(1, 1, 4, 4)))
    gaps = torch.from_numpy(
        rng.choice([-1.0, 1.0], size=(1, 1, 4, 4)) * rng.uniform(0.2, 1.0, size=(1, 1, 4, 4))
    )
    weight = sobel_weight_map(target)
    pred = (target + gaps).requires_grad_(True)
    weighted_l1(pred, target, weight).backward()
    eps = 1e-3
    worst = 0.0
    for i in range(4):
        for j in range(4):
            delta = torch.zeros_like(target)
            delta[0, 0, i, j] = eps
            hi = weighted_l1(pred.detach() + delta, target, weight).item()
            lo = weighted_l1(pred.detach() - delta, target, weight).item()
            fd = (hi - lo) / (2 * eps)
            rel = abs(pred.grad[0, 0, i, j].item() - fd) / max(abs(fd), 1e-12)
            worst = max(worst, rel)
    check(worst <= 1e-4, f"l1 gradient off by {worst:.2e} relative")

    # edge weights stay in [1, 2] and collapse to 1 on constant targets
    # (3.7 is inexact in binary, so conv cancellation residue is exercised)
    w_const = sobel_weight_map(np.full((16, 16), 3.7))
    check(np.all(w_const == 1.0), "constant target should weight to 1 everywhere")
    w_rand = sobel_weight_map(np.random.default_rng(4).normal(size=(24, 24)))
    check(w_rand.min() >= 1.0 and w_rand.max() <= 2.0,
          f"edge weights outside [1, 2]: [{w_rand.min():.3f}, {w_rand.max():.3f}]")

    _gate("trainer smoke suite", failures)


def test_dual_view_ablation(tmp_path):
    failures, check = _checks()

    # targets equal the opposing view, so the single-input model cannot do
    # better than a dataset prior while the dual-input model can copy it
    manifest = _make_dataset(tmp_path, 24, 8, size=32, block=4, seed=21,
                             opposing_target=True)
    for seed in (0, 1, 2):
        val_l1 = {}
        for mode in ("dual", "single"):
            cfg = TrainConfig.smoke(epochs=3, levels=5, seed=seed, input_mode=mode)
            result = train(manifest, cfg, tmp_path / f"run_{mode}_{seed}")
            val_l1[mode] = result.history[-1]["val_l1"]
        check(
            val_l1["dual"] < val_l1["single"],
            f"seed {seed}: dual val l1 {val_l1['dual']:.2f} not below "
            f"single {val_l1['single']:.2f}",
        )

    _gate("dual-view ablation", failures)
