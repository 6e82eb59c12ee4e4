"""Embedding heads over frozen features: identity pass-through, linear, and
small MLP, with analytic gradients of the episodic loss.

Gradients are reverse-mode by hand: the loss is backpropagated through the
posterior, the distances, the prototypes (supports receive gradient through
the class mean), and finally the affine layers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import (
    BadMagic,
    DimensionMismatch,
    EmptyClass,
    EmptyQuerySet,
    InvalidArchitecture,
    NonFiniteInput,
    TruncatedFile,
    UnsupportedVersion,
)
from .rng import Rng

PFNW_MAGIC = b"PFNW"
PFNW_VERSION = 1
_ARCH_TAGS = {"identity": 0, "linear": 1, "mlp": 2}
_TAG_ARCH = {v: k for k, v in _ARCH_TAGS.items()}


@dataclass(frozen=True)
class FeatureMap:
    """C x H x W backbone output."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3 or min(vals.shape) < 1:
            raise ValueError("feature map must be (C, H, W) with all dims >= 1")
        object.__setattr__(self, "values", vals)

    @property
    def shape(self):
        return self.values.shape


def flatten_feature_map(fmap: FeatureMap) -> np.ndarray:
    """Channel-major then row-major flattening: index = c*(H*W) + h*W + w."""
    return fmap.values.reshape(-1).copy()


def unflatten_feature_map(vec, shape) -> FeatureMap:
    return FeatureMap(values=np.asarray(vec, dtype=np.float64).reshape(shape))


@dataclass(frozen=True)
class EmbeddingNetwork:
    """Immutable head f_phi: identity (no parameters) or affine stack with
    rectifier activations between hidden layers."""

    architecture: str
    layer_dims: tuple
    weights: tuple  # per affine layer, (out, in)
    biases: tuple  # per affine layer, (out,)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def params(self) -> list:
        """Parameter list in optimizer order: all weights, then all biases."""
        return list(self.weights) + list(self.biases)

    def with_params(self, params) -> "EmbeddingNetwork":
        n = len(self.weights)
        return replace(self, weights=tuple(params[:n]), biases=tuple(params[n:]))


def init_network(architecture: str, layer_dims, seed: int = 0) -> EmbeddingNetwork:
    """Deterministic init: weights uniform on +-sqrt(6/(fan_in+fan_out)),
    biases zero."""
    dims = tuple(int(d) for d in layer_dims)
    if not dims or any(d < 1 for d in dims):
        raise InvalidArchitecture("layer_dims must be nonempty, all >= 1")
    if architecture == "identity":
        if len(set(dims)) != 1:
            raise InvalidArchitecture("identity head requires input dim == output dim")
        return EmbeddingNetwork("identity", (dims[0], dims[-1]), (), ())
    if architecture == "linear":
        if len(dims) != 2:
            raise InvalidArchitecture("linear head takes exactly [D, M]")
    elif architecture == "mlp":
        if len(dims) < 3:
            raise InvalidArchitecture("mlp head needs at least one hidden layer")
    else:
        raise InvalidArchitecture(f"unknown architecture {architecture!r}")
    rng = Rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        half = np.sqrt(6.0 / (fan_in + fan_out))
        u = rng.fill_uniform(fan_out * fan_in).reshape(fan_out, fan_in)
        weights.append((2.0 * u - 1.0) * half)
        biases.append(np.zeros(fan_out))
    return EmbeddingNetwork(architecture, dims, tuple(weights), tuple(biases))


def _check_input(net: EmbeddingNetwork, x: np.ndarray):
    if x.shape[-1] != net.input_dim:
        raise DimensionMismatch(
            f"input dim {x.shape[-1]} != network input dim {net.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("network input contains NaN or Inf")


def _forward_cached(net: EmbeddingNetwork, x: np.ndarray):
    """Forward pass on a (n, D) matrix keeping per-layer activations."""
    acts = [x]
    pre = []
    a = x
    n_layers = len(net.weights)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < n_layers - 1 else z
        acts.append(a)
    return acts, pre


def embed_forward(net: EmbeddingNetwork, x) -> np.ndarray:
    """Map input(s) through the head; accepts a vector or a (n, D) matrix."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    _check_input(net, arr)
    if net.architecture == "identity":
        out = arr.copy()
    else:
        out = _forward_cached(net, arr)[0][-1]
    return out[0] if single else out


def _backward(net: EmbeddingNetwork, acts, pre, grad_out):
    """Backprop grad_out (n, M) through the affine stack; returns gradient
    list in optimizer order."""
    n_layers = len(net.weights)
    g_w = [None] * n_layers
    g_b = [None] * n_layers
    g = grad_out
    for i in range(n_layers - 1, -1, -1):
        if i < n_layers - 1:
            g = g * (pre[i] > 0.0)
        g_w[i] = g.T @ acts[i]
        g_b[i] = g.sum(axis=0)
        g = g @ net.weights[i]
    return g_w + g_b


def loss_gradients(net: EmbeddingNetwork, episode):
    """Episodic loss and d(loss)/d(phi), including the prototype path."""
    sup_x = np.asarray(episode.support_features, dtype=np.float64)
    qry_x = np.asarray(episode.query_features, dtype=np.float64)
    sup_y = np.asarray(episode.support_labels, dtype=np.int64)
    qry_y = np.asarray(episode.query_labels, dtype=np.int64)
    if qry_x.shape[0] == 0:
        raise EmptyQuerySet("episode has no queries")
    _check_input(net, sup_x)
    _check_input(net, qry_x)
    n_way = episode.n_way

    if net.architecture == "identity":
        sup_z, qry_z = sup_x, qry_x
    else:
        sup_acts, sup_pre = _forward_cached(net, sup_x)
        qry_acts, qry_pre = _forward_cached(net, qry_x)
        sup_z, qry_z = sup_acts[-1], qry_acts[-1]

    protos, counts = _kernels.class_means(sup_z, sup_y, n_way)
    if np.any(counts == 0):
        raise EmptyClass("episode class without support examples")
    dists = _kernels.pairwise_sq_dists(qry_z, protos)
    log_p = _kernels.log_softmax_rows(-dists)
    n_q = qry_z.shape[0]
    loss = float(-log_p[np.arange(n_q), qry_y].mean())

    if net.architecture == "identity":
        return [], loss

    p = np.exp(log_p)
    d_logits = p.copy()
    d_logits[np.arange(n_q), qry_y] -= 1.0
    d_logits /= n_q
    dd = -d_logits  # gradient w.r.t. squared distances
    # d_{q,k} = ||z_q - c_k||^2
    g_q = 2.0 * (qry_z * dd.sum(axis=1, keepdims=True) - dd @ protos)
    g_c = -2.0 * (dd.T @ qry_z - dd.sum(axis=0)[:, None] * protos)
    g_s = g_c[sup_y] / counts[sup_y][:, None]

    grads_q = _backward(net, qry_acts, qry_pre, g_q)
    grads_s = _backward(net, sup_acts, sup_pre, g_s)
    return [a + b for a, b in zip(grads_q, grads_s)], loss


# ---------------------------------------------------------------------------
# PFNW checkpoint format


def save_network(net: EmbeddingNetwork, path) -> None:
    """Binary little-endian checkpoint; write-then-read is bit-exact."""
    with open(path, "wb") as fh:
        fh.write(PFNW_MAGIC)
        fh.write(struct.pack("<IB", PFNW_VERSION, _ARCH_TAGS[net.architecture]))
        fh.write(struct.pack("<I", len(net.layer_dims)))
        for d in net.layer_dims:
            fh.write(struct.pack("<Q", d))
        for w in net.weights:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        for b in net.biases:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_network(path) -> EmbeddingNetwork:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != PFNW_MAGIC:
        raise BadMagic(f"not a PFNW checkpoint: {path}")
    if len(blob) < 13:
        raise TruncatedFile("PFNW header truncated")
    version, tag = struct.unpack_from("<IB", blob, 4)
    if version != PFNW_VERSION:
        raise UnsupportedVersion(f"PFNW version {version} not supported")
    if tag not in _TAG_ARCH:
        raise TruncatedFile(f"unknown architecture tag {tag}")
    (n_dims,) = struct.unpack_from("<I", blob, 9)
    off = 13
    if off + 8 * n_dims > len(blob):
        raise TruncatedFile("PFNW dims truncated")
    dims = struct.unpack_from(f"<{n_dims}Q", blob, off)
    off += 8 * n_dims
    arch = _TAG_ARCH[tag]
    if arch == "identity":
        if off != len(blob):
            raise TruncatedFile("identity checkpoint has trailing bytes")
        return EmbeddingNetwork(arch, tuple(int(d) for d in dims), (), ())
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        count = int(fan_out * fan_in)
        if off + 8 * count > len(blob):
            raise TruncatedFile("PFNW weights truncated")
        w = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
        weights.append(w.reshape(fan_out, fan_in).copy())
        off += 8 * count
    for fan_out in dims[1:]:
        count = int(fan_out)
        if off + 8 * count > len(blob):
            raise TruncatedFile("PFNW biases truncated")
        biases.append(np.frombuffer(blob, dtype="<f8", count=count, offset=off).copy())
        off += 8 * count
    if off != len(blob):
        raise TruncatedFile("PFNW has trailing bytes")
    return EmbeddingNetwork(
        arch, tuple(int(d) for d in dims), tuple(weights), tuple(biases)
    )
