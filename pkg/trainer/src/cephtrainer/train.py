"""Seeded training loop: alternating discriminator/generator Adam steps with
per-epoch learning-rate decay, per-epoch validation RMSE/PSNR, a tab-separated
metrics log, and an atomically written checkpoint.
"""

from __future__ import annotations

import argparse
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import INPUT_MODES, PairDataset, from_unit
from .losses import cgan_losses, weighted_l1
from .networks import build_networks

LOG_HEADER = "epoch\tloss_g\tloss_d\ttrain_l1\tval_l1\tval_rmse\tval_psnr"


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults are the full-scale recipe, use
    ``smoke()`` for test-sized runs."""

    epochs: int = 300
    lr: float = 2e-4
    lr_decay: float = 0.999
    l1_weight: float = 100.0
    sobel_weighting: bool = True
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 1
    seed: int = 0
    input_mode: str = "dual"
    levels: int = 8
    base_channels: int = 64

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.l1_weight < 0:
            raise ValueError("l1_weight must be >= 0")
        if self.lr <= 0 or not 0 < self.lr_decay <= 1:
            raise ValueError("need lr > 0 and 0 < lr_decay <= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"input_mode must be one of {INPUT_MODES}")

    @classmethod
    def smoke(cls, **overrides) -> "TrainConfig":
        """64-pixel smoke recipe: 6 levels, thin channels, 5 epochs."""
        base = dict(epochs=5, levels=6, base_channels=16)
        base.update(overrides)
        return cls(**base)


@dataclass
class TrainResult:
    checkpoint: Path
    log: Path
    history: list = field(default_factory=list)


def _atomic_torch_save(obj, path: Path) -> Path:
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(obj, tmp)
    os.replace(tmp, path)
    return path


def _gray_l1(pred: torch.Tensor, target: torch.Tensor) -> float:
    return float(weighted_l1(pred, target)) * 127.5


def _evaluate(generator, ds: PairDataset) -> tuple[float, float, float]:
    """Mean val l1/RMSE (gray levels) and PSNR (dB, 255 peak) over a split."""
    generator.eval()
    l1s, rmses, psnrs = [], [], []
    with torch.no_grad():
        for i in range(len(ds)):
            x, y = ds[i]
            pred = generator(x.unsqueeze(0))[0]
            diff = from_unit(pred) - from_unit(y)
            l1s.append(float(np.abs(diff).mean()))
            rmse = float(np.sqrt(np.mean(diff * diff)))
            rmses.append(rmse)
            psnrs.append(float("inf") if rmse == 0 else 20.0 * math.log10(255.0 / rmse))
    generator.train()
    return float(np.mean(l1s)), float(np.mean(rmses)), float(np.mean(psnrs))


def train(manifest, cfg: TrainConfig, out_dir) -> TrainResult:
    """Train on the manifest's train split, validating each epoch.

    Writes ``metrics.tsv`` and ``checkpoint.pt`` under ``out_dir`` and
    returns their paths plus the per-epoch history rows.  Fully seeded: the
    same manifest, config, and seed produce byte-identical logs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_ds = PairDataset(manifest, "train", cfg.input_mode)
    val_ds = PairDataset(manifest, "val", cfg.input_mode)

    torch.manual_seed(cfg.seed)
    nets = build_networks(train_ds.in_channels, 1, cfg.levels, cfg.base_channels)
    opt_g = torch.optim.Adam(nets.generator.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    opt_d = torch.optim.Adam(nets.discriminator.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    sched_g = torch.optim.lr_scheduler.ExponentialLR(opt_g, gamma=cfg.lr_decay)
    sched_d = torch.optim.lr_scheduler.ExponentialLR(opt_d, gamma=cfg.lr_decay)
    shuffler = torch.Generator().manual_seed(cfg.seed)

    history = []
    lines = [LOG_HEADER]
    for epoch in range(1, cfg.epochs + 1):
        order = torch.randperm(len(train_ds), generator=shuffler).tolist()
        g_sum = d_sum = l1_sum = 0.0
        batches = 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            x = torch.stack([train_ds[i][0] for i in idx])
            y = torch.stack([train_ds[i][1] for i in idx])
            loss_g, loss_d = cgan_losses(x, y, nets, cfg)
            # generator first: its step leaves the detached discriminator
            # graph intact, so both losses see the same parameter point
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()
            opt_d.zero_grad()
            loss_d.backward()
            opt_d.step()
            with torch.no_grad():
                l1_sum += _gray_l1(nets.generator(x), y)
            g_sum += loss_g.detach().item()
            d_sum += loss_d.detach().item()
            batches += 1
        sched_g.step()
        sched_d.step()
        val_l1, val_rmse, val_psnr = _evaluate(nets.generator, val_ds)
        row = {
            "epoch": epoch,
            "loss_g": g_sum / batches,
            "loss_d": d_sum / batches,
            "train_l1": l1_sum / batches,
            "val_l1": val_l1,
            "val_rmse": val_rmse,
            "val_psnr": val_psnr,
        }
        history.append(row)
        lines.append(
            "{epoch}\t{loss_g:.6f}\t{loss_d:.6f}\t{train_l1:.6f}\t"
            "{val_l1:.6f}\t{val_rmse:.6f}\t{val_psnr:.6f}".format(**row)
        )

    log = out_dir / "metrics.tsv"
    log.write_text("\n".join(lines) + "\n", encoding="utf-8")
    checkpoint = _atomic_torch_save(
        {
            "generator": nets.generator.state_dict(),
            "discriminator": nets.discriminator.state_dict(),
            "config": asdict(cfg),
            "epochs": cfg.epochs,
        },
        out_dir / "checkpoint.pt",
    )
    return TrainResult(checkpoint, log, history)


def main() -> None:
    ap = argparse.ArgumentParser(description="train the patch-translation GAN on a pair manifest")
    ap.add_argument("--manifest", required=True)
    ap.add_argument("--out", required=True, help="output directory for log + checkpoint")
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--lr", type=float, default=2e-4)
    ap.add_argument("--l1-weight", type=float, default=100.0)
    ap.add_argument("--no-sobel", action="store_true", help="disable edge weighting")
    ap.add_argument("--input-mode", choices=list(INPUT_MODES), default="dual")
    ap.add_argument("--levels", type=int, default=8)
    ap.add_argument("--base-channels", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    cfg = TrainConfig(
        epochs=a.epochs, lr=a.lr, l1_weight=a.l1_weight,
        sobel_weighting=not a.no_sobel, input_mode=a.input_mode,
        levels=a.levels, base_channels=a.base_channels, seed=a.seed,
    )
    result = train(a.manifest, cfg, a.out)
    last = result.history[-1]
    print(f"checkpoint: {result.checkpoint}")
    print(f"log: {result.log}")
    print(f"final val RMSE {last['val_rmse']:.3f}, PSNR {last['val_psnr']:.3f} dB")


if __name__ == "__main__":
    main()
