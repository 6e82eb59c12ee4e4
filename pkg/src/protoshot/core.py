"""Prototype-based few-shot classification kernel.

Prototypes are class means of embedded support points; queries are scored
by squared Euclidean distance to each prototype.  The posterior is a
softmax over negative squared distances and the episodic loss is the mean
negative log posterior of the true class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatch,
    EmptyClass,
    EmptyQuerySet,
    NonFiniteInput,
)


@dataclass(frozen=True)
class PrototypeSet:
    """One prototype per episode class, with the global class ids attached."""

    prototypes: np.ndarray  # (n_classes, M)
    class_ids: tuple = field(default=())

    def __post_init__(self):
        protos = np.asarray(self.prototypes, dtype=np.float64)
        object.__setattr__(self, "prototypes", protos)
        if not self.class_ids:
            object.__setattr__(self, "class_ids", tuple(range(protos.shape[0])))

    @property
    def n_classes(self) -> int:
        return self.prototypes.shape[0]

    @property
    def dim(self) -> int:
        return self.prototypes.shape[1]


def _as_matrix(vectors, name: str) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a (n, M) array with M >= 1")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return arr


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise DimensionMismatch(f"{name} must be a 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return arr


def compute_prototypes(support_embeddings, support_labels, n_classes, class_ids=()):
    """Per-class mean of the embedded support points."""
    emb = _as_matrix(support_embeddings, "support_embeddings")
    labels = np.asarray(support_labels, dtype=np.int64)
    if labels.shape != (emb.shape[0],):
        raise DimensionMismatch("one label per support embedding required")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DimensionMismatch("support label out of range")
    means, counts = _kernels.class_means(emb, labels, n_classes)
    if np.any(counts == 0):
        missing = int(np.flatnonzero(counts == 0)[0])
        raise EmptyClass(f"class {missing} has no support examples")
    return PrototypeSet(prototypes=means, class_ids=tuple(class_ids))


def squared_euclidean_distance(a, b) -> float:
    va = _as_vector(a, "a")
    vb = _as_vector(b, "b")
    if va.shape != vb.shape:
        raise DimensionMismatch(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    return float(_kernels.pairwise_sq_dists(va[None, :], vb[None, :])[0, 0])


def _query_distances(queries, prototypes: PrototypeSet) -> np.ndarray:
    q = _as_matrix(queries, "query")
    if q.shape[1] != prototypes.dim:
        raise DimensionMismatch(
            f"query dim {q.shape[1]} != prototype dim {prototypes.dim}"
        )
    return _kernels.pairwise_sq_dists(q, prototypes.prototypes)


def posterior_over_classes(query, prototypes: PrototypeSet) -> np.ndarray:
    """Softmax over negative squared distances, max-stabilized."""
    dists = _query_distances(query, prototypes)
    log_p = _kernels.log_softmax_rows(-dists)
    return np.exp(log_p[0])


def classify_query(query, prototypes: PrototypeSet) -> int:
    """Index of the nearest prototype; ties go to the lowest class index."""
    dists = _query_distances(query, prototypes)
    return int(np.argmin(dists[0]))


def classify_queries(queries, prototypes: PrototypeSet) -> np.ndarray:
    """Batch nearest-prototype assignment (lowest-index ties)."""
    dists = _query_distances(queries, prototypes)
    return np.argmin(dists, axis=1)


def episode_loss(query_embeddings, query_labels, prototypes: PrototypeSet) -> float:
    """Mean negative log posterior of the true class over the query set."""
    q = _as_matrix(query_embeddings, "query_embeddings")
    labels = np.asarray(query_labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptyQuerySet("episode loss needs at least one query")
    if labels.shape != (q.shape[0],):
        raise DimensionMismatch("one label per query embedding required")
    if labels.min() < 0 or labels.max() >= prototypes.n_classes:
        raise DimensionMismatch("query label out of range")
    dists = _query_distances(q, prototypes)
    log_p = _kernels.log_softmax_rows(-dists)
    return float(-log_p[np.arange(labels.size), labels].mean())
