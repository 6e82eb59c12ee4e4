"""Image tree -> frozen backbone features -> PFEB file."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .backbones import BACKBONES, UnknownBackbone, build_backbone, forward_features
from .pfeb import write_pfeb

IMAGE_EXTENSIONS = (".pgm", ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")

# PIL raises several exception types for broken files; treat them uniformly
_DECODE_ERRORS = (UnidentifiedImageError, OSError, ValueError)

# standard ImageNet statistics, applied only with imagenet_norm=True
_IMAGENET_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(3, 1, 1)
_IMAGENET_STD = torch.tensor([0.229, 0.224, 0.225]).view(3, 1, 1)


class UndecodableImage(Exception):
    pass


class EmptyImageTree(Exception):
    pass


def load_image_tensor(path, imagenet_norm: bool = False) -> torch.Tensor:
    """Resize to 224x224, force RGB (grayscale replicated), scale by 1/255."""
    try:
        with Image.open(path) as img:
            img = img.convert("RGB").resize((224, 224), Image.BILINEAR)
            arr = np.asarray(img, dtype=np.float32) / 255.0
    except _DECODE_ERRORS as exc:
        raise UndecodableImage(f"{path}: {exc}") from exc
    t = torch.from_numpy(arr).permute(2, 0, 1)
    if imagenet_norm:
        t = (t - _IMAGENET_MEAN) / _IMAGENET_STD
    return t


def scan_image_tree(root):
    root = Path(root)
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    class_names = [d.name for d in class_dirs]
    entries = []
    for idx, d in enumerate(class_dirs):
        for f in sorted(d.iterdir()):
            if f.suffix.lower() in IMAGE_EXTENSIONS:
                entries.append((f, idx))
    if not entries:
        raise EmptyImageTree(f"no images found under {root}")
    return class_names, entries


def extract(
    root,
    backbone: str,
    out_path,
    imagenet_norm: bool = False,
    pretrained: bool = True,
    batch_size: int = 16,
) -> int:
    """Run every image through the frozen backbone and write a PFEB file.

    Returns the number of images extracted; also writes ``<out>.manifest.txt``.
    """
    if backbone not in BACKBONES:
        raise UnknownBackbone(f"unknown backbone {backbone!r}")
    spec = BACKBONES[backbone]
    class_names, entries = scan_image_tree(root)
    trunk = build_backbone(backbone, pretrained=pretrained)

    features = np.empty((len(entries), spec.feature_dim), dtype=np.float32)
    labels = np.empty(len(entries), dtype=np.int64)
    for start in range(0, len(entries), batch_size):
        chunk = entries[start : start + batch_size]
        batch = torch.stack([load_image_tensor(p, imagenet_norm) for p, _ in chunk])
        feats = forward_features(trunk, batch)
        assert feats.shape[1] == spec.feature_dim
        features[start : start + len(chunk)] = feats.numpy()
        labels[start : start + len(chunk)] = [lab for _, lab in chunk]

    write_pfeb(out_path, class_names, features, labels)
    manifest = Path(str(out_path) + ".manifest.txt")
    manifest.write_text(
        f"backbone: {backbone}\n"
        f"truncation: classification head removed, ends at final {spec.output_shape} conv map\n"
        f"pretrained: {pretrained}\n"
        f"normalization: {'imagenet mean/std' if imagenet_norm else '1/255 only'}\n"
        f"images: {len(entries)}\n"
        f"feature_dim: {spec.feature_dim}\n"
    )
    return len(entries)
