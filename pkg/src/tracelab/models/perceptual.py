"""Perceptual feature network for the visual-similarity loss.

Default mode is a deterministic fixed-weight CNN (seeded, frozen) so the
repo needs no downloaded weights; a torchvision VGG16 can be requested
explicitly when its pretrained weights are available locally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn


@dataclass
class PerceptualConfig:
    layer_index: int = 2          # features taken after the k-th ReLU
    network: str = "fixed"        # "fixed" | "vgg16"
    seed: int = 1234              # fixed mode only

    def __post_init__(self):
        if self.layer_index < 1:
            raise ValueError("layer_index must be >= 1")
        if self.network not in ("fixed", "vgg16"):
            raise ValueError(f"unknown perceptual network {self.network!r}")


class FixedFeatureNet(nn.Module):
    """Three strided conv+ReLU stages with seeded, frozen He-scaled weights."""

    WIDTHS = (16, 32, 64)

    def __init__(self, seed, in_channels=3):
        super().__init__()
        layers = []
        ic = in_channels
        for w in self.WIDTHS:
            layers += [nn.Conv2d(ic, w, 3, stride=2, padding=1), nn.ReLU()]
            ic = w
        self.stages = nn.Sequential(*layers)
        gen = torch.Generator().manual_seed(int(seed))
        with torch.no_grad():
            for m in self.stages:
                if isinstance(m, nn.Conv2d):
                    fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
                    m.weight.copy_(torch.randn(m.weight.shape, generator=gen)
                                   * math.sqrt(2.0 / fan_in))
                    m.bias.zero_()
        for p in self.parameters():
            p.requires_grad_(False)

    def features_at(self, x, layer_index):
        relu_count = 0
        for m in self.stages:
            x = m(x)
            if isinstance(m, nn.ReLU):
                relu_count += 1
                if relu_count == layer_index:
                    return x
        return x


_CACHE: dict = {}


def get_feature_net(cfg: PerceptualConfig) -> nn.Module:
    key = (cfg.network, cfg.seed)
    if key in _CACHE:
        return _CACHE[key]
    if cfg.network == "fixed":
        net = FixedFeatureNet(cfg.seed)
    else:
        try:
            from torchvision.models import vgg16
            net = vgg16(weights="IMAGENET1K_V1").features.eval()
            for p in net.parameters():
                p.requires_grad_(False)
        except Exception as exc:
            raise RuntimeError("pretrained VGG16 weights unavailable; use the "
                               "fixed perceptual network") from exc
    _CACHE[key] = net
    return net


def perceptual_features(batch, cfg: PerceptualConfig) -> torch.Tensor:
    """Deterministic feature map of an NCHW batch at the configured layer."""
    net = get_feature_net(cfg)
    if cfg.network == "fixed":
        return net.features_at(batch, cfg.layer_index)
    relu_count = 0
    x = batch
    for m in net:
        x = m(x)
        if isinstance(m, nn.ReLU):
            relu_count += 1
            if relu_count == cfg.layer_index:
                return x
    return x


def perceptual_distance(a, b, cfg: PerceptualConfig) -> torch.Tensor:
    """Mean over the batch of ||feat(a) - feat(b)||^2 / (W*H) of the feature map."""
    fa = perceptual_features(a, cfg)
    fb = perceptual_features(b, cfg)
    w, h = fa.shape[-1], fa.shape[-2]
    return ((fa - fb) ** 2).sum(dim=(1, 2, 3)).mean() / (w * h)
