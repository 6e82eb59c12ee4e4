"""Writer for the PFEB feature-interchange format.

Layout (little-endian): magic "PFEB", u32 version=1, u64 n_examples,
u64 dim, u32 n_classes, per class {u16 name length, UTF-8 name}, per
example {u32 class index, dim x f32 features}.
"""

from __future__ import annotations

import struct

import numpy as np

PFEB_MAGIC = b"PFEB"
PFEB_VERSION = 1


def write_pfeb(path, class_names, features: np.ndarray, labels) -> None:
    feats = np.ascontiguousarray(features, dtype="<f4")
    labels = np.asarray(labels, dtype=np.int64)
    assert feats.ndim == 2 and labels.shape == (feats.shape[0],)
    with open(path, "wb") as fh:
        fh.write(PFEB_MAGIC)
        fh.write(
            struct.pack(
                "<IQQI", PFEB_VERSION, feats.shape[0], feats.shape[1], len(class_names)
            )
        )
        for name in class_names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        for i in range(feats.shape[0]):
            fh.write(struct.pack("<I", int(labels[i])))
            fh.write(feats[i].tobytes())
