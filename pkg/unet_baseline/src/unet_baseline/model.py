"""U-Net architecture: a 4-level encoder/decoder with skip connections.

The network keeps spatial dimensions through padded 3x3 convolutions, so
a (H, W, 3) input yields a (H, W, classes) per-pixel probability map.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class UNetConfig:
    """Architecture and training hyperparameters.

    input_size is (height, width); both must be divisible by 2**depth so
    every max-pool halving is exact.
    """

    input_size: tuple[int, int] = (384, 384)
    in_channels: int = 3
    depth: int = 4
    base_filters: int = 64
    class_count: int = 2
    epochs: int = 60
    learning_rate: float = 1e-4
    batch_size: int = 2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_size", tuple(int(v) for v in self.input_size))
        if len(self.input_size) != 2 or min(self.input_size) < 1:
            raise ValueError("input_size must be a (height, width) pair of positive ints")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        factor = 2 ** self.depth
        if any(v % factor for v in self.input_size):
            raise ValueError(
                f"input size {self.input_size} must be divisible by 2^depth = {factor}"
            )
        if self.class_count < 2:
            raise ValueError(f"class_count must be >= 2, got {self.class_count}")
        if self.in_channels < 1 or self.base_filters < 1:
            raise ValueError("in_channels and base_filters must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")

    @property
    def encoder_filters(self) -> tuple[int, ...]:
        return tuple(self.base_filters * 2 ** i for i in range(self.depth))

    @property
    def bridge_filters(self) -> int:
        return self.base_filters * 2 ** self.depth


class _DoubleConv(nn.Module):
    """Two padded 3x3 convolutions, each followed by a rectifier."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_channels, out_channels, kernel_size=3, padding=1),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.block(x)


class UNet(nn.Module):
    """Encoder/bridge/decoder stack with skip concatenations.

    forward() returns per-pixel class probabilities (softmax over the
    channel axis); logits() returns the raw head output for loss
    computation, which is mathematically equivalent under cross-entropy.
    """

    def __init__(self, config: UNetConfig):
        super().__init__()
        self.config = config
        filters = config.encoder_filters

        self.encoders = nn.ModuleList()
        in_ch = config.in_channels
        for out_ch in filters:
            self.encoders.append(_DoubleConv(in_ch, out_ch))
            in_ch = out_ch
        self.pool = nn.MaxPool2d(kernel_size=2, stride=2)
        self.bridge = _DoubleConv(filters[-1], config.bridge_filters)

        self.upconvs = nn.ModuleList()
        self.decoders = nn.ModuleList()
        up_in = config.bridge_filters
        for out_ch in reversed(filters):
            self.upconvs.append(
                nn.ConvTranspose2d(up_in, out_ch, kernel_size=2, stride=2)
            )
            # Concatenating the mirror encoder output doubles the channels.
            self.decoders.append(_DoubleConv(out_ch * 2, out_ch))
            up_in = out_ch
        self.head = nn.Conv2d(filters[0], config.class_count, kernel_size=1)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise ValueError(
                f"expected input of shape (batch, {self.config.in_channels}, h, w), "
                f"got {tuple(x.shape)}"
            )
        factor = 2 ** self.config.depth
        if x.shape[2] % factor or x.shape[3] % factor:
            raise ValueError(
                f"spatial dims {tuple(x.shape[2:])} must be divisible by {factor}"
            )
        skips = []
        for encoder in self.encoders:
            x = encoder(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bridge(x)
        for upconv, decoder, skip in zip(self.upconvs, self.decoders, reversed(skips)):
            x = upconv(x)
            x = decoder(torch.cat([skip, x], dim=1))
        return self.head(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.logits(x), dim=1)


def build_unet(config: UNetConfig) -> UNet:
    """Construct the network with seeded parameter initialization."""
    generator_state = torch.random.get_rng_state()
    try:
        torch.manual_seed(config.seed)
        return UNet(config)
    finally:
        torch.random.set_rng_state(generator_state)
