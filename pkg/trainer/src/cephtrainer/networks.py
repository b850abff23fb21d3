"""Networks: a U-Net generator that bottlenecks to 1x1 with standard halving
(8 levels for 256-pixel patches, 6 for the 64-pixel smoke size) and a 5-layer
patch discriminator with a 70x70 receptive field.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


class _UNetBlock(nn.Module):
    # one encoder/decoder ring; skip connections concatenate except at the
    # outermost level, which maps to the output channel count directly
    def __init__(self, outer_ch, inner_ch, in_ch=None, submodule=None,
                 outermost=False, innermost=False):
        super().__init__()
        self.outermost = outermost
        in_ch = outer_ch if in_ch is None else in_ch
        down_conv = nn.Conv2d(in_ch, inner_ch, 4, stride=2, padding=1, bias=innermost or outermost)
        if outermost:
            up = nn.ConvTranspose2d(inner_ch * 2, outer_ch, 4, stride=2, padding=1)
            layers = [down_conv, submodule, nn.ReLU(), up, nn.Tanh()]
        elif innermost:
            up = nn.ConvTranspose2d(inner_ch, outer_ch, 4, stride=2, padding=1, bias=False)
            layers = [nn.LeakyReLU(0.2), down_conv, nn.ReLU(), up, nn.BatchNorm2d(outer_ch)]
        else:
            up = nn.ConvTranspose2d(inner_ch * 2, outer_ch, 4, stride=2, padding=1, bias=False)
            layers = [
                nn.LeakyReLU(0.2), down_conv, nn.BatchNorm2d(inner_ch),
                submodule, nn.ReLU(), up, nn.BatchNorm2d(outer_ch),
            ]
        self.body = nn.Sequential(*layers)

    def forward(self, x):
        out = self.body(x)
        return out if self.outermost else torch.cat([x, out], dim=1)


class UNetGenerator(nn.Module):
    """Image-to-image U-Net; input must be divisible by 2**levels, and with
    input size == 2**levels the bottleneck is exactly 1x1.

    Channel widths double per level, capped at 8x the base width.
    """

    def __init__(self, in_channels: int, out_channels: int = 1, levels: int = 8,
                 base_channels: int = 64):
        super().__init__()
        if levels < 2:
            raise ValueError("need at least 2 levels")
        widths = [min(base_channels * 2 ** d, base_channels * 8) for d in range(levels)]
        block = _UNetBlock(widths[-2], widths[-1], innermost=True)
        for d in range(levels - 3, -1, -1):
            block = _UNetBlock(widths[d], widths[d + 1], submodule=block)
        self.levels = levels
        self.body = _UNetBlock(
            out_channels, widths[0], in_ch=in_channels, submodule=block, outermost=True
        )

    def forward(self, x):
        size = 2 ** self.levels
        if x.shape[2] % size or x.shape[3] % size:
            raise ValueError(f"input dims {tuple(x.shape[2:])} not divisible by 2^{self.levels}")
        return self.body(x)


class PatchDiscriminator(nn.Module):
    """5 convolutions classifying 70x70 input patches from the channel
    concatenation of the conditioning image and a candidate."""

    def __init__(self, in_channels: int, base_channels: int = 64):
        super().__init__()
        b = base_channels
        self.body = nn.Sequential(
            nn.Conv2d(in_channels, b, 4, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(b, 2 * b, 4, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(2 * b), nn.LeakyReLU(0.2),
            nn.Conv2d(2 * b, 4 * b, 4, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(4 * b), nn.LeakyReLU(0.2),
            nn.Conv2d(4 * b, 8 * b, 4, stride=1, padding=1, bias=False),
            nn.BatchNorm2d(8 * b), nn.LeakyReLU(0.2),
            nn.Conv2d(8 * b, 1, 4, stride=1, padding=1),
        )

    def forward(self, x, candidate):
        return self.body(torch.cat([x, candidate], dim=1))


@dataclass
class GanPair:
    generator: nn.Module
    discriminator: nn.Module


def build_networks(in_channels: int, out_channels: int = 1, levels: int = 8,
                   base_channels: int = 64) -> GanPair:
    g = UNetGenerator(in_channels, out_channels, levels, base_channels)
    d = PatchDiscriminator(in_channels + out_channels, base_channels)
    return GanPair(g, d)
