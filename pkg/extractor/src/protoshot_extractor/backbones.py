"""Truncated ImageNet backbones used as frozen feature extractors.

The classification layers are removed so the network ends at its final
convolutional feature map: VGG16 and ResNet-18 emit 512x7x7, ResNet-50
emits 2048x7x7 for 224x224 inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torchvision import models


class UnknownBackbone(Exception):
    pass


class WeightDownloadFailure(Exception):
    pass


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    output_shape: tuple  # (C, H, W) for 224x224 input

    @property
    def feature_dim(self) -> int:
        c, h, w = self.output_shape
        return c * h * w


BACKBONES = {
    "vgg16": BackboneSpec("vgg16", (512, 7, 7)),
    "resnet18": BackboneSpec("resnet18", (512, 7, 7)),
    "resnet50": BackboneSpec("resnet50", (2048, 7, 7)),
}


def build_backbone(name: str, pretrained: bool = True) -> nn.Module:
    """Build the truncated, frozen backbone in inference mode."""
    if name not in BACKBONES:
        raise UnknownBackbone(f"unknown backbone {name!r}; pick from {sorted(BACKBONES)}")
    weights = "IMAGENET1K_V1" if pretrained else None
    try:
        if name == "vgg16":
            full = models.vgg16(weights=weights)
            trunk = full.features  # drop avgpool + classifier head
        elif name == "resnet18":
            full = models.resnet18(weights=weights)
            trunk = nn.Sequential(*list(full.children())[:-2])
        else:
            full = models.resnet50(weights=weights)
            trunk = nn.Sequential(*list(full.children())[:-2])
    except UnknownBackbone:
        raise
    except Exception as exc:
        raise WeightDownloadFailure(f"could not obtain weights for {name}: {exc}") from exc
    trunk.eval()
    for p in trunk.parameters():
        p.requires_grad_(False)
    return trunk


@torch.no_grad()
def forward_features(trunk: nn.Module, batch: torch.Tensor) -> torch.Tensor:
    """Run the frozen trunk and flatten channel-major to (n, C*H*W)."""
    out = trunk(batch)
    return out.reshape(out.shape[0], -1)
