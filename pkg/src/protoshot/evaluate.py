"""Frozen-parameter episodic evaluation: accuracy with confidence
intervals, confusion matrices in global class indices, and report emission
(CSV plus an aligned text table)."""

from __future__ import annotations

import csv
import hashlib
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import compute_prototypes, classify_queries
from .data import LabeledDataset
from .embed import EmbeddingNetwork, embed_forward
from .episodes import EpisodeConfig, sample_episode
from .errors import EmptyMatrix
from .rng import Rng, derive_seed

MODE_WITHOUT = "without_training"
MODE_WITH = "with_training"


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (n_classes, n_classes), [actual][predicted]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class EvalRow:
    backbone: str
    n_way: int
    k_shot: int
    mode: str
    episodes: int
    accuracy_mean: float
    accuracy_ci95: float
    wall_time_s: float
    confusion: ConfusionMatrix = None


@dataclass
class EvalReport:
    rows: list
    seed: int = 0
    config_hash: str = ""
    metadata: dict = field(default_factory=dict)


def weighted_accuracy(cm: ConfusionMatrix) -> float:
    """Support-weighted per-class recall; algebraically trace/total."""
    counts = cm.counts
    total = counts.sum()
    if total < 1:
        raise EmptyMatrix("confusion matrix has no counts")
    support = counts.sum(axis=1)
    acc = 0.0
    for c in range(cm.n_classes):
        if support[c] == 0:
            continue  # zero-support classes carry zero weight
        acc += (support[c] / total) * (counts[c, c] / support[c])
    return float(acc)


def _run_episode(dataset, network, config, seed, i, n_classes):
    rng = Rng(derive_seed(seed, i))
    episode = sample_episode(dataset, config, rng)
    sup_z = embed_forward(network, episode.support_features)
    qry_z = embed_forward(network, episode.query_features)
    protos = compute_prototypes(
        sup_z, episode.support_labels, config.n_way, class_ids=episode.class_ids
    )
    pred = classify_queries(qry_z, protos)
    ids = np.asarray(episode.class_ids, dtype=np.int64)
    actual_global = ids[episode.query_labels]
    pred_global = ids[pred]
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (actual_global, pred_global), 1)
    acc = float((pred == episode.query_labels).mean())
    return acc, cm


def evaluate(
    dataset: LabeledDataset,
    network: EmbeddingNetwork,
    config: EpisodeConfig,
    n_episodes: int,
    seed: int,
    backbone: str = "",
    mode: str = MODE_WITHOUT,
    threads: int = 1,
):
    """Evaluate n_episodes frozen-parameter episodes.

    Each episode draws from its own stream derived from (seed, index), so
    results are independent of scheduling; every reported number except
    wall time is reproducible from the seed.
    """
    n_classes = dataset.n_classes
    t0 = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(
                    lambda i: _run_episode(dataset, network, config, seed, i, n_classes),
                    range(n_episodes),
                )
            )
    else:
        results = [
            _run_episode(dataset, network, config, seed, i, n_classes)
            for i in range(n_episodes)
        ]
    wall = time.perf_counter() - t0
    accs = np.array([r[0] for r in results])
    cm_total = np.zeros((n_classes, n_classes), dtype=np.int64)
    for _, cm in results:  # reduce in episode-index order
        cm_total += cm
    mean = float(accs.mean())
    ci = (
        float(1.96 * accs.std(ddof=1) / np.sqrt(len(accs))) if len(accs) > 1 else 0.0
    )
    row = EvalRow(
        backbone=backbone,
        n_way=config.n_way,
        k_shot=config.k_shot,
        mode=mode,
        episodes=n_episodes,
        accuracy_mean=mean,
        accuracy_ci95=ci,
        wall_time_s=wall,
        confusion=ConfusionMatrix(counts=cm_total),
    )
    return row, row.confusion


_MODE_ORDER = {MODE_WITHOUT: 0, MODE_WITH: 1}


def summarize(rows, seed: int = 0, config_hash: str = "") -> EvalReport:
    """Order rows by (backbone, shot ascending, mode) and attach metadata."""
    if not rows:
        raise EmptyMatrix("cannot summarize an empty row list")
    ordered = sorted(
        rows, key=lambda r: (r.backbone, r.k_shot, _MODE_ORDER.get(r.mode, 2))
    )
    return EvalReport(rows=ordered, seed=seed, config_hash=config_hash)


CSV_HEADER = [
    "backbone",
    "n_way",
    "k_shot",
    "mode",
    "episodes",
    "accuracy_mean",
    "accuracy_ci95",
    "wall_time_s",
]


def report_to_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in report.rows:
        writer.writerow(
            [
                r.backbone,
                r.n_way,
                r.k_shot,
                r.mode,
                r.episodes,
                f"{r.accuracy_mean:.4f}",
                f"{r.accuracy_ci95:.4f}",
                f"{r.wall_time_s:.3f}",
            ]
        )
    return buf.getvalue()


def confusions_to_csv(report: EvalReport) -> str:
    """Confusion matrices as adjacent CSV blocks, one per report row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for r in report.rows:
        writer.writerow(
            ["# confusion", r.backbone, r.n_way, r.k_shot, r.mode, r.episodes]
        )
        for actual_row in r.confusion.counts:
            writer.writerow([int(v) for v in actual_row])
    return buf.getvalue()


def format_table(report: EvalReport) -> str:
    """Aligned plain-text table: backbone x shot x mode."""
    header = f"{'Backbone':<14}{'Shot':>6}{'Mode':>20}{'Accuracy':>12}{'CI95':>10}{'Time (s)':>12}"
    lines = [header, "-" * len(header)]
    for r in report.rows:
        lines.append(
            f"{r.backbone:<14}{r.k_shot:>6}{r.mode:>20}"
            f"{100 * r.accuracy_mean:>11.2f}%{100 * r.accuracy_ci95:>9.2f}%"
            f"{r.wall_time_s:>12.3f}"
        )
    return "\n".join(lines)


def parse_report_csv(text: str) -> EvalReport:
    rows = []
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_HEADER:
        raise EmptyMatrix("unrecognized report CSV header")
    for rec in reader:
        rows.append(
            EvalRow(
                backbone=rec[0],
                n_way=int(rec[1]),
                k_shot=int(rec[2]),
                mode=rec[3],
                episodes=int(rec[4]),
                accuracy_mean=float(rec[5]),
                accuracy_ci95=float(rec[6]),
                wall_time_s=float(rec[7]),
            )
        )
    return EvalReport(rows=rows)


def config_digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(str(p).encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()[:16]
