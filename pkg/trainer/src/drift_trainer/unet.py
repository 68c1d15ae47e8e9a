"""Encoder-decoder network with skip connections for map-to-map regression.

The classic U-Net layout: double 3x3 convolutions per level, max-pool
downsampling, bilinear upsampling followed by a 3x3 convolution (transposed
convolutions leave checkerboard ripple across the background, which corrupts
mass-centroid measurements on the predicted densities), and
channel-concatenation skips.  Grids whose sides are not multiples of
2**depth are reflect-padded on entry and cropped on exit, so output dims
always equal input dims.

The final 1x1 head is zero-initialized: a fresh model outputs exactly zero,
which reads as "no change" for change-map regression, and with the density
residual enabled as "next map equals current map".  Training therefore starts
from the identity predictor instead of noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn


@dataclass(frozen=True)
class ModelSpec:
    """Capacity hyperparameters, recorded verbatim in every checkpoint."""

    in_channels: int = 3
    out_channels: int = 1
    depth: int = 4
    base_width: int = 32

    def __post_init__(self):
        if self.in_channels < 1:
            raise ValueError(f"in_channels must be >= 1, got {self.in_channels}")
        if self.out_channels != 1:
            raise ValueError(f"out_channels must be 1, got {self.out_channels}")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.base_width < 1:
            raise ValueError(f"base_width must be >= 1, got {self.base_width}")


class _DoubleConv(nn.Module):
    # group normalization keeps behavior batch-size independent and identical
    # between train and eval passes, unlike batch norm
    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        groups = math.gcd(8, out_ch)
        self.block = nn.Sequential(
            nn.Conv2d(in_ch, out_ch, 3, padding=1),
            nn.GroupNorm(groups, out_ch),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_ch, out_ch, 3, padding=1),
            nn.GroupNorm(groups, out_ch),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.block(x)


class UNet(nn.Module):
    def __init__(self, spec: ModelSpec, density_residual: bool = False):
        super().__init__()
        self.spec = spec
        self.density_residual = bool(density_residual)
        widths = [spec.base_width * (2**k) for k in range(spec.depth + 1)]
        self.encoders = nn.ModuleList()
        self.encoders.append(_DoubleConv(spec.in_channels, widths[0]))
        for k in range(1, spec.depth + 1):
            self.encoders.append(_DoubleConv(widths[k - 1], widths[k]))
        self.pool = nn.MaxPool2d(2)
        self.upsamples = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for k in range(spec.depth, 0, -1):
            self.upsamples.append(
                nn.Sequential(
                    nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
                    nn.Conv2d(widths[k], widths[k - 1], 3, padding=1),
                )
            )
            self.decoders.append(_DoubleConv(2 * widths[k - 1], widths[k - 1]))
        self.head = nn.Conv2d(widths[0], spec.out_channels, 1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4:
            raise ValueError(f"expected (B, C, H, W) input, got shape {tuple(x.shape)}")
        if x.shape[1] != self.spec.in_channels:
            raise ValueError(
                f"model expects {self.spec.in_channels} input channels, got {x.shape[1]}"
            )
        height, width = x.shape[2], x.shape[3]
        multiple = 2**self.spec.depth
        pad_h = (-height) % multiple
        pad_w = (-width) % multiple
        h = x
        if pad_h or pad_w:
            # reflect padding requires pad < dim; smaller grids need less depth
            if pad_h >= height or pad_w >= width:
                raise ValueError(
                    f"grid {height}x{width} too small for depth {self.spec.depth}"
                )
            h = F.pad(h, (0, pad_w, 0, pad_h), mode="reflect")

        skips = []
        for k, encoder in enumerate(self.encoders):
            if k > 0:
                h = self.pool(h)
            h = encoder(h)
            if k < len(self.encoders) - 1:
                skips.append(h)
        for upsample, decoder, skip in zip(self.upsamples, self.decoders, reversed(skips)):
            h = upsample(h)
            h = decoder(torch.cat((skip, h), dim=1))
        out = self.head(h)[:, :, :height, :width]
        if self.density_residual:
            out = out + x[:, -1:, :, :]
        return out
