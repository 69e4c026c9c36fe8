"""The three trace discriminators.

All share a five-layer strided CNN backbone with global pooling and a linear
binary head. The spatial one reads pixels, the spectral one the 2-channel
[amplitude, phase] DFT representation, and the fingerprint one applies a
fixed SRM filter front end and carries a second, source-identification head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ..torchbridge import SrmLayer, spectrum_channels, to_tensor


class DiscriminatorKind:
    SPATIAL = "spatial"
    SPECTRAL = "spectral"
    FINGERPRINT = "fingerprint"


@dataclass
class DiscriminatorSpec:
    kind: str = DiscriminatorKind.SPATIAL
    conv_layers: int = 5
    base_channels: int = 32  # widths double per layer: 32 -> 512 by default
    image_channels: int = 3
    source_count: int = 0    # fingerprint kind only

    def __post_init__(self):
        if self.kind not in (DiscriminatorKind.SPATIAL, DiscriminatorKind.SPECTRAL,
                             DiscriminatorKind.FINGERPRINT):
            raise ValueError(f"unknown discriminator kind {self.kind!r}")
        if self.kind == DiscriminatorKind.FINGERPRINT and self.source_count < 2:
            raise ValueError("fingerprint discriminator needs source_count >= 2")

    @property
    def input_channels(self) -> int:
        if self.kind == DiscriminatorKind.SPATIAL:
            return self.image_channels
        if self.kind == DiscriminatorKind.SPECTRAL:
            return 2
        return 3 * self.image_channels  # SRM maps


class ConvBackbone(nn.Module):
    """conv(s2) + BN + LeakyReLU stack, global average pooled."""

    def __init__(self, in_channels, base_channels, n_layers):
        super().__init__()
        widths = [base_channels * 2 ** i for i in range(n_layers)]
        layers = []
        ic = in_channels
        for i, w in enumerate(widths):
            layers.append(nn.Conv2d(ic, w, 3, stride=2, padding=1))
            if i > 0:
                layers.append(nn.BatchNorm2d(w))
            layers.append(nn.LeakyReLU(0.2))
            ic = w
        self.features = nn.Sequential(*layers)
        self.out_width = widths[-1]
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, a=0.2, nonlinearity="leaky_relu")
                nn.init.zeros_(m.bias)

    def forward(self, x):
        return self.features(x).mean(dim=(2, 3))


class TraceDiscriminator(nn.Module):
    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        self.srm = SrmLayer(spec.image_channels) if spec.kind == DiscriminatorKind.FINGERPRINT else None
        self.backbone = ConvBackbone(spec.input_channels, spec.base_channels, spec.conv_layers)
        self.binary_head = nn.Linear(self.backbone.out_width, 1)
        if spec.kind == DiscriminatorKind.FINGERPRINT:
            hidden = max(spec.source_count, self.backbone.out_width // 2)
            self.source_head = nn.Sequential(
                nn.Linear(self.backbone.out_width, hidden),
                nn.LeakyReLU(0.2),
                nn.Linear(hidden, spec.source_count),
            )
        else:
            self.source_head = None

    def forward(self, x):
        """Binary logit (N,), plus (N, S) source logits for the fingerprint kind.

        Spatial kind takes pixels, spectral the 2-channel spectrum; the
        fingerprint kind takes pixels and applies its SRM front end here.
        """
        expected = self.spec.image_channels if self.srm is not None else self.spec.input_channels
        if x.shape[1] != expected:
            raise ValueError(f"{self.spec.kind} discriminator expects {expected} "
                             f"input channels, got {x.shape[1]}")
        if self.srm is not None:
            x = self.srm(x)
        h = self.backbone(x)
        logit = self.binary_head(h).squeeze(1)
        if self.source_head is not None:
            return logit, self.source_head(h)
        return logit


def build_discriminators(source_count, base_channels=32, image_channels=3):
    """The parallel trio (spatial, spectral, fingerprint)."""
    d1 = TraceDiscriminator(DiscriminatorSpec(DiscriminatorKind.SPATIAL,
                                              base_channels=base_channels,
                                              image_channels=image_channels))
    d2 = TraceDiscriminator(DiscriminatorSpec(DiscriminatorKind.SPECTRAL,
                                              base_channels=base_channels,
                                              image_channels=image_channels))
    d3 = TraceDiscriminator(DiscriminatorSpec(DiscriminatorKind.FINGERPRINT,
                                              base_channels=base_channels,
                                              image_channels=image_channels,
                                              source_count=source_count))
    return d1, d2, d3


def discriminator_input(disc: TraceDiscriminator, batch) -> torch.Tensor:
    """Build the representation a discriminator consumes from an image batch."""
    if disc.spec.kind == DiscriminatorKind.SPECTRAL:
        return spectrum_channels(batch)
    return batch


def discriminator_forward(disc: TraceDiscriminator, img):
    """Single-image convenience wrapper over numpy images."""
    disc.eval()
    with torch.no_grad():
        out = disc(discriminator_input(disc, to_tensor(img)))
    if isinstance(out, tuple):
        return float(out[0][0]), out[1][0].numpy()
    return float(out[0])
