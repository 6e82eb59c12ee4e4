"""Numeric hot kernels with two backends: numba @njit and pure numpy.

The numba path is the default whenever numba imports; set the environment
variable ``PROTOSHOT_NUMBA=0`` to force the pure-numpy fallback.  Both
backends are kept importable side by side (see ``IMPLS``) so the benchmark
script can compare them directly.
"""

from __future__ import annotations

import math
import os

import numpy as np

_MASK = (1 << 64) - 1


def _numba_requested() -> bool:
    flag = os.environ.get("PROTOSHOT_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


# ---------------------------------------------------------------------------
# pure-numpy / pure-python implementations


def _np_fill_uniform(s0, s1, s2, s3, out):
    # Sequential recurrence; python ints avoid numpy overflow warnings.
    n = out.shape[0]
    inv = 2.0 ** -53
    for i in range(n):
        r = ((((s1 * 5) & _MASK) << 7 | ((s1 * 5) & _MASK) >> 57) & _MASK) * 9 & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        out[i] = (r >> 11) * inv
    return s0, s1, s2, s3


def _np_pairwise_sq_dists(queries, protos):
    diff = queries[:, None, :] - protos[None, :, :]
    return np.einsum("qkj,qkj->qk", diff, diff)


def _np_class_means(points, labels, n_classes):
    dim = points.shape[1]
    sums = np.zeros((n_classes, dim))
    counts = np.zeros(n_classes, dtype=np.int64)
    np.add.at(sums, labels, points)
    np.add.at(counts, labels, 1)
    means = sums / np.maximum(counts, 1)[:, None]
    return means, counts


def _np_log_softmax_rows(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _np_bilinear_resize(img, target_h, target_w):
    h, w = img.shape
    rows = (
        np.linspace(0.0, h - 1.0, target_h)
        if target_h > 1
        else np.zeros(1)
    )
    cols = (
        np.linspace(0.0, w - 1.0, target_w)
        if target_w > 1
        else np.zeros(1)
    )
    r0 = np.minimum(rows.astype(np.int64), h - 1)
    c0 = np.minimum(cols.astype(np.int64), w - 1)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    top = img[np.ix_(r0, c0)] * (1 - fc) + img[np.ix_(r0, c1)] * fc
    bot = img[np.ix_(r1, c0)] * (1 - fc) + img[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bot * fr


def _np_rotate_bilinear(img, angle_rad):
    h, w = img.shape
    cr = (h - 1) / 2.0
    cc = (w - 1) / 2.0
    cos_a = math.cos(angle_rad)
    sin_a = math.sin(angle_rad)
    rr, cc_grid = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    dr = rr - cr
    dc = cc_grid - cc
    src_r = cr + dr * cos_a - dc * sin_a
    src_c = cc + dr * sin_a + dc * cos_a
    r0 = np.floor(src_r).astype(np.int64)
    c0 = np.floor(src_c).astype(np.int64)
    fr = src_r - r0
    fc = src_c - c0
    out = np.zeros_like(img)

    def at(ri, ci):
        valid = (ri >= 0) & (ri < h) & (ci >= 0) & (ci < w)
        vals = np.zeros_like(img)
        vals[valid] = img[ri[valid], ci[valid]]
        return vals

    out = (
        at(r0, c0) * (1 - fr) * (1 - fc)
        + at(r0, c0 + 1) * (1 - fr) * fc
        + at(r0 + 1, c0) * fr * (1 - fc)
        + at(r0 + 1, c0 + 1) * fr * fc
    )
    return out


_NUMPY_IMPL = {
    "fill_uniform": _np_fill_uniform,
    "pairwise_sq_dists": _np_pairwise_sq_dists,
    "class_means": _np_class_means,
    "log_softmax_rows": _np_log_softmax_rows,
    "bilinear_resize": _np_bilinear_resize,
    "rotate_bilinear": _np_rotate_bilinear,
}


# ---------------------------------------------------------------------------
# numba implementations

_NUMBA_IMPL = None

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

if _HAVE_NUMBA:

    @njit(cache=True)
    def _nb_fill_uniform_jit(s0, s1, s2, s3, out):
        inv = 2.0 ** -53
        for i in range(out.shape[0]):
            x = s1 * np.uint64(5)
            r = ((x << np.uint64(7)) | (x >> np.uint64(57))) * np.uint64(9)
            t = s1 << np.uint64(17)
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
            out[i] = (r >> np.uint64(11)) * inv
        return s0, s1, s2, s3

    def _nb_fill_uniform(s0, s1, s2, s3, out):
        a, b, c, d = _nb_fill_uniform_jit(
            np.uint64(s0), np.uint64(s1), np.uint64(s2), np.uint64(s3), out
        )
        return int(a), int(b), int(c), int(d)

    @njit(cache=True)
    def _nb_pairwise_sq_dists(queries, protos):
        n, m = queries.shape
        k = protos.shape[0]
        out = np.empty((n, k))
        for q in range(n):
            for p in range(k):
                acc = 0.0
                for j in range(m):
                    d = queries[q, j] - protos[p, j]
                    acc += d * d
                out[q, p] = acc
        return out

    @njit(cache=True)
    def _nb_class_means(points, labels, n_classes):
        n, dim = points.shape
        sums = np.zeros((n_classes, dim))
        counts = np.zeros(n_classes, dtype=np.int64)
        for i in range(n):
            lab = labels[i]
            counts[lab] += 1
            for j in range(dim):
                sums[lab, j] += points[i, j]
        means = np.empty((n_classes, dim))
        for k in range(n_classes):
            c = counts[k] if counts[k] > 0 else 1
            for j in range(dim):
                means[k, j] = sums[k, j] / c
        return means, counts

    @njit(cache=True)
    def _nb_log_softmax_rows(logits):
        n, k = logits.shape
        out = np.empty((n, k))
        for i in range(n):
            mx = logits[i, 0]
            for j in range(1, k):
                if logits[i, j] > mx:
                    mx = logits[i, j]
            s = 0.0
            for j in range(k):
                s += math.exp(logits[i, j] - mx)
            ls = math.log(s)
            for j in range(k):
                out[i, j] = logits[i, j] - mx - ls
        return out

    @njit(cache=True)
    def _nb_bilinear_resize(img, target_h, target_w):
        h, w = img.shape
        out = np.empty((target_h, target_w))
        for r in range(target_h):
            src_r = r * (h - 1.0) / (target_h - 1.0) if target_h > 1 else 0.0
            r0 = int(src_r)
            if r0 > h - 1:
                r0 = h - 1
            r1 = r0 + 1 if r0 + 1 < h else h - 1
            fr = src_r - r0
            for c in range(target_w):
                src_c = c * (w - 1.0) / (target_w - 1.0) if target_w > 1 else 0.0
                c0 = int(src_c)
                if c0 > w - 1:
                    c0 = w - 1
                c1 = c0 + 1 if c0 + 1 < w else w - 1
                fc = src_c - c0
                top = img[r0, c0] * (1 - fc) + img[r0, c1] * fc
                bot = img[r1, c0] * (1 - fc) + img[r1, c1] * fc
                out[r, c] = top * (1 - fr) + bot * fr
        return out

    @njit(cache=True)
    def _nb_rotate_bilinear(img, angle_rad):
        h, w = img.shape
        cr = (h - 1) / 2.0
        cc = (w - 1) / 2.0
        cos_a = math.cos(angle_rad)
        sin_a = math.sin(angle_rad)
        out = np.zeros((h, w))
        for r in range(h):
            for c in range(w):
                src_r = cr + (r - cr) * cos_a - (c - cc) * sin_a
                src_c = cc + (r - cr) * sin_a + (c - cc) * cos_a
                r0 = int(math.floor(src_r))
                c0 = int(math.floor(src_c))
                fr = src_r - r0
                fc = src_c - c0
                acc = 0.0
                for dr in range(2):
                    for dc in range(2):
                        ri = r0 + dr
                        ci = c0 + dc
                        if 0 <= ri < h and 0 <= ci < w:
                            wr = fr if dr == 1 else 1.0 - fr
                            wc = fc if dc == 1 else 1.0 - fc
                            acc += img[ri, ci] * wr * wc
                out[r, c] = acc
        return out

    _NUMBA_IMPL = {
        "fill_uniform": _nb_fill_uniform,
        "pairwise_sq_dists": _nb_pairwise_sq_dists,
        "class_means": _nb_class_means,
        "log_softmax_rows": _nb_log_softmax_rows,
        "bilinear_resize": _nb_bilinear_resize,
        "rotate_bilinear": _nb_rotate_bilinear,
    }


IMPLS = {"numpy": _NUMPY_IMPL}
if _NUMBA_IMPL is not None:
    IMPLS["numba"] = _NUMBA_IMPL

USE_NUMBA = _HAVE_NUMBA and _numba_requested()
BACKEND = "numba" if USE_NUMBA else "numpy"

_active = IMPLS[BACKEND]
fill_uniform = _active["fill_uniform"]
pairwise_sq_dists = _active["pairwise_sq_dists"]
class_means = _active["class_means"]
log_softmax_rows = _active["log_softmax_rows"]
bilinear_resize = _active["bilinear_resize"]
rotate_bilinear = _active["rotate_bilinear"]
