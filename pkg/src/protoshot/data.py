"""Dataset model and IO: feature interchange files (PFEB), PGM images,
preprocessing, augmentation, synthetic blobs, and stratified splitting.

Features are stored in single precision (the interchange precision); all
downstream math promotes to float64.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    BadMagic,
    ClassIndexOutOfRange,
    ClassTooSmall,
    EmptyDataset,
    MalformedPGM,
    TruncatedFile,
    UnsupportedVersion,
    ZeroTargetSize,
)
from .rng import Rng

PFEB_MAGIC = b"PFEB"
PFEB_VERSION = 1


@dataclass
class LabeledDataset:
    """Feature vectors with global class labels and stable source indices."""

    class_names: list
    features: np.ndarray  # (n, D) float32
    labels: np.ndarray  # (n,) int64
    source_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a (n, D) array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("one label per example required")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= len(self.class_names)
        ):
            raise ClassIndexOutOfRange("label outside the class table")
        if self.source_ids is None:
            self.source_ids = np.arange(len(self.labels), dtype=np.int64)
        else:
            self.source_ids = np.asarray(self.source_ids, dtype=np.int64)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass
class GrayImage:
    """2-D grayscale image; raw pixels are 0..255, preprocessed are [0,1]."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ValueError("pixels must be a nonempty 2-D array")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class ImageDataset:
    class_names: list
    images: list
    labels: list


# ---------------------------------------------------------------------------
# PFEB feature interchange format


def save_embeddings(dataset: LabeledDataset, path) -> None:
    """Write a dataset as a PFEB file (little-endian, f32 features)."""
    with open(path, "wb") as fh:
        fh.write(PFEB_MAGIC)
        fh.write(
            struct.pack(
                "<IQQI",
                PFEB_VERSION,
                len(dataset),
                dataset.feature_dim,
                dataset.n_classes,
            )
        )
        for name in dataset.class_names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        feats = np.ascontiguousarray(dataset.features, dtype="<f4")
        for i in range(len(dataset)):
            fh.write(struct.pack("<I", int(dataset.labels[i])))
            fh.write(feats[i].tobytes())


def load_embeddings(path) -> LabeledDataset:
    """Read a PFEB file; round trip with save_embeddings is bit-exact."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != PFEB_MAGIC:
        raise BadMagic(f"not a PFEB file: {path}")
    if len(blob) < 28:
        raise TruncatedFile("PFEB header truncated")
    version, n_examples, dim, n_classes = struct.unpack_from("<IQQI", blob, 4)
    if version != PFEB_VERSION:
        raise UnsupportedVersion(f"PFEB version {version} not supported")
    off = 28
    class_names = []
    for _ in range(n_classes):
        if off + 2 > len(blob):
            raise TruncatedFile("PFEB class table truncated")
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        if off + name_len > len(blob):
            raise TruncatedFile("PFEB class name truncated")
        class_names.append(blob[off : off + name_len].decode("utf-8"))
        off += name_len
    example_bytes = 4 + 4 * dim
    if len(blob) - off != n_examples * example_bytes:
        raise TruncatedFile(
            f"PFEB body has {len(blob) - off} bytes, "
            f"expected {n_examples * example_bytes}"
        )
    labels = np.empty(n_examples, dtype=np.int64)
    features = np.empty((n_examples, dim), dtype=np.float32)
    for i in range(n_examples):
        (cls,) = struct.unpack_from("<I", blob, off)
        if cls >= n_classes:
            raise ClassIndexOutOfRange(f"example {i} class {cls} >= {n_classes}")
        labels[i] = cls
        off += 4
        features[i] = np.frombuffer(blob, dtype="<f4", count=dim, offset=off)
        off += 4 * dim
    return LabeledDataset(class_names=class_names, features=features, labels=labels)


# ---------------------------------------------------------------------------
# PGM (P5) images


def read_pgm(path) -> GrayImage:
    """Binary 8-bit PGM loader; pixels kept raw 0..255."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] != b"P5":
        raise MalformedPGM(f"not a binary (P5) PGM: {path}")
    # header tokens: magic, width, height, maxval; '#' comments allowed
    tokens = []
    pos = 2
    while len(tokens) < 3 and pos < len(blob):
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        tokens.append(blob[start:pos])
    if len(tokens) < 3:
        raise MalformedPGM(f"truncated PGM header: {path}")
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise MalformedPGM(f"bad PGM header in {path}") from exc
    if maxval <= 0 or maxval > 255:
        raise MalformedPGM(f"unsupported PGM maxval {maxval}")
    pos += 1  # single whitespace after maxval
    data = blob[pos : pos + width * height]
    if len(data) != width * height:
        raise MalformedPGM(f"PGM pixel data truncated: {path}")
    pixels = np.frombuffer(data, dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels=pixels.astype(np.float64))


def write_pgm(img: GrayImage, path) -> None:
    pixels = np.clip(np.rint(img.pixels), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def load_image_dataset(root) -> ImageDataset:
    """Class-per-subdirectory PGM tree -> ImageDataset (raw pixels)."""
    from pathlib import Path

    root = Path(root)
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    class_names = [d.name for d in class_dirs]
    images, labels = [], []
    for idx, d in enumerate(class_dirs):
        for f in sorted(d.glob("*.pgm")):
            images.append(read_pgm(f))
            labels.append(idx)
    if not images:
        raise EmptyDataset(f"no PGM images under {root}")
    return ImageDataset(class_names=class_names, images=images, labels=labels)


# ---------------------------------------------------------------------------
# preprocessing and augmentation


def preprocess_image(img: GrayImage, target_h: int, target_w: int) -> GrayImage:
    """Corner-aligned bilinear resize, then scale 0..255 -> [0,1]."""
    if target_h < 1 or target_w < 1:
        raise ZeroTargetSize("target size must be at least 1x1")
    resized = _kernels.bilinear_resize(img.pixels, target_h, target_w)
    return GrayImage(pixels=resized / 255.0)


@dataclass
class AugmentSpec:
    crop_scale_min: float = 0.8
    crop_scale_max: float = 1.0
    flip_prob: float = 0.5
    max_rotation_deg: float = 10.0


def augment_image(img: GrayImage, spec: AugmentSpec, rng: Rng) -> GrayImage:
    """Random crop-and-resize, horizontal flip, small rotation, in that order.

    Always draws the same number of random values, so streams stay aligned
    whatever the parameters.
    """
    h, w = img.height, img.width
    scale = spec.crop_scale_min + rng.random() * (
        spec.crop_scale_max - spec.crop_scale_min
    )
    ch = max(1, int(round(scale * h)))
    cw = max(1, int(round(scale * w)))
    r_off = rng.below(h - ch + 1)
    c_off = rng.below(w - cw + 1)
    pixels = img.pixels[r_off : r_off + ch, c_off : c_off + cw]
    if (ch, cw) != (h, w):
        pixels = _kernels.bilinear_resize(pixels, h, w)
    if rng.random() < spec.flip_prob:
        pixels = pixels[:, ::-1]
    angle = (2.0 * rng.random() - 1.0) * spec.max_rotation_deg
    pixels = _kernels.rotate_bilinear(
        np.ascontiguousarray(pixels), math.radians(angle)
    )
    return GrayImage(pixels=pixels)


# ---------------------------------------------------------------------------
# synthetic data and splitting


def generate_blobs(class_means, per_class, sigma, seed, class_names=None):
    """Gaussian blob dataset around the given class means.

    ``per_class`` is an int or per-class sequence; ``sigma`` is a scalar or
    per-dimension sequence of componentwise standard deviations.
    """
    means = np.asarray(class_means, dtype=np.float64)
    n_classes, dim = means.shape
    if np.isscalar(per_class):
        per_class = [int(per_class)] * n_classes
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (dim,))
    if class_names is None:
        class_names = [f"class{k}" for k in range(n_classes)]
    rng = Rng(seed)
    feats, labels = [], []
    for k in range(n_classes):
        for _ in range(per_class[k]):
            point = np.array([rng.normal() for _ in range(dim)])
            feats.append(means[k] + sigma * point)
            labels.append(k)
    return LabeledDataset(
        class_names=list(class_names),
        features=np.asarray(feats, dtype=np.float32),
        labels=np.asarray(labels, dtype=np.int64),
    )


def split_train_val(dataset: LabeledDataset, ratio: float = 0.8, seed: int = 0):
    """Stratified split: floor(ratio * n_c) per class to train, rest to val."""
    rng = Rng(seed)
    train_idx, val_idx = [], []
    for k in range(dataset.n_classes):
        idxs = list(np.flatnonzero(dataset.labels == k))
        if len(idxs) < 2:
            raise ClassTooSmall(
                f"class {dataset.class_names[k]} has {len(idxs)} examples, needs >= 2"
            )
        rng.shuffle(idxs)
        n_train = int(math.floor(ratio * len(idxs)))
        n_train = min(max(n_train, 1), len(idxs) - 1)
        train_idx.extend(idxs[:n_train])
        val_idx.extend(idxs[n_train:])
    train_idx.sort()
    val_idx.sort()

    def take(idxs):
        idxs = np.asarray(idxs, dtype=np.int64)
        return LabeledDataset(
            class_names=list(dataset.class_names),
            features=dataset.features[idxs],
            labels=dataset.labels[idxs],
            source_ids=dataset.source_ids[idxs],
        )

    return take(train_idx), take(val_idx)
