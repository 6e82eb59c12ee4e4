"""N-way K-shot episode construction with disjoint support/query sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .errors import InsufficientClasses
from .rng import Rng


@dataclass(frozen=True)
class EpisodeConfig:
    n_way: int
    k_shot: int
    q_query: int

    def __post_init__(self):
        if self.n_way < 2:
            raise ValueError("n_way must be >= 2")
        if self.k_shot < 1 or self.q_query < 1:
            raise ValueError("k_shot and q_query must be >= 1")

    @property
    def per_class_need(self) -> int:
        return self.k_shot + self.q_query


@dataclass(frozen=True)
class Episode:
    """One sampled task: features in class-major order, labels are
    episode-class indices (positions in ``class_ids``)."""

    class_ids: tuple  # global class ids, in sampled order
    support_features: np.ndarray  # (n_way * k_shot, D) float64
    support_labels: np.ndarray  # episode-class indices
    support_indices: np.ndarray  # dataset positions
    query_features: np.ndarray
    query_labels: np.ndarray
    query_indices: np.ndarray

    @property
    def n_way(self) -> int:
        return len(self.class_ids)

    @property
    def feature_dim(self) -> int:
        return self.support_features.shape[1]


def eligible_classes(dataset: LabeledDataset, config: EpisodeConfig) -> list:
    """Classes holding at least k_shot + q_query examples, ascending id."""
    counts = dataset.class_counts()
    return [k for k in range(dataset.n_classes) if counts[k] >= config.per_class_need]


def sample_episode(dataset: LabeledDataset, config: EpisodeConfig, rng: Rng) -> Episode:
    """Draw one episode: n_way distinct eligible classes, then per class
    k_shot + q_query distinct examples (first k_shot become support)."""
    eligible = eligible_classes(dataset, config)
    if len(eligible) < config.n_way:
        raise InsufficientClasses(
            f"{len(eligible)} classes have >= {config.per_class_need} examples, "
            f"need {config.n_way}"
        )
    chosen = rng.sample(eligible, config.n_way)
    sup_idx, qry_idx, sup_lab, qry_lab = [], [], [], []
    for episode_cls, global_cls in enumerate(chosen):
        pool = np.flatnonzero(dataset.labels == global_cls)
        picked = rng.sample(list(pool), config.per_class_need)
        sup_idx.extend(picked[: config.k_shot])
        qry_idx.extend(picked[config.k_shot :])
        sup_lab.extend([episode_cls] * config.k_shot)
        qry_lab.extend([episode_cls] * config.q_query)
    sup_idx = np.asarray(sup_idx, dtype=np.int64)
    qry_idx = np.asarray(qry_idx, dtype=np.int64)
    return Episode(
        class_ids=tuple(int(c) for c in chosen),
        support_features=dataset.features[sup_idx].astype(np.float64),
        support_labels=np.asarray(sup_lab, dtype=np.int64),
        support_indices=sup_idx,
        query_features=dataset.features[qry_idx].astype(np.float64),
        query_labels=np.asarray(qry_lab, dtype=np.int64),
        query_indices=qry_idx,
    )
