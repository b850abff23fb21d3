"""Toy-scale conditional-GAN trainer for dual-projection patch datasets.

Consumes exported datasets purely through their manifest TSV + PNG format;
see ``data`` for the contract, ``train.TrainConfig`` for the recipe knobs.
"""

from .data import PAIR_MANIFEST_HEADER, PairDataset, PairRecord, read_pair_manifest
from .losses import cgan_losses, sobel_weight_map, weighted_l1
from .networks import GanPair, PatchDiscriminator, UNetGenerator, build_networks
from .train import LOG_HEADER, TrainConfig, TrainResult, train

__all__ = [
    "PAIR_MANIFEST_HEADER",
    "PairDataset",
    "PairRecord",
    "read_pair_manifest",
    "cgan_losses",
    "sobel_weight_map",
    "weighted_l1",
    "GanPair",
    "PatchDiscriminator",
    "UNetGenerator",
    "build_networks",
    "LOG_HEADER",
    "TrainConfig",
    "TrainResult",
    "train",
]
